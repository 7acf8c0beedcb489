#include <iostream>

#include "fragsched/cli.hpp"

int main(int argc, char** argv) { return fragsched::run_cli(argc, argv, std::cout, std::cerr); }
