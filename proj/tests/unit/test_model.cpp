#include <doctest.h>

#include "fragsched/error.hpp"
#include "fragsched/model.hpp"
#include "support/fixtures.hpp"

using namespace fragsched;

namespace {

ModelSpec tiny() {
  ModelSpec m;
  m.model_id = "tiny";
  m.input_bytes = 1000;
  m.layers = {{1.0, 800}, {2.0, 900}, {0.5, 300}, {0.5, 400}, {1.0, 10}};
  return m;
}

}  // namespace

TEST_CASE("boundary payloads and span weights") {
  const auto m = tiny();
  CHECK(m.boundary_bytes(0) == 1000);
  CHECK(m.boundary_bytes(1) == 800);
  CHECK(m.boundary_bytes(5) == 10);
  CHECK_THROWS_AS(m.boundary_bytes(6), DomainError);
  CHECK(m.span_weight({0, 5}) == doctest::Approx(5.0));
  CHECK(m.span_weight({1, 3}) == doctest::Approx(2.5));
  CHECK(m.span_weight({2, 2}) == 0.0);
  CHECK_THROWS_AS(m.span_weight({3, 2}), DomainError);
}

TEST_CASE("payload minima are interior local minima") {
  // Payloads by boundary: 1000, 800, 900, 300, 400, 10
  CHECK(tiny().payload_minima() == std::vector<int>{1, 3});
}

TEST_CASE("model json round trip and validation") {
  const auto m = tiny();
  const auto back = model_from_json(model_to_json(m));
  CHECK(back.model_id == m.model_id);
  CHECK(back.input_bytes == m.input_bytes);
  REQUIRE(back.layers.size() == m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    CHECK(back.layers[i].compute_weight == m.layers[i].compute_weight);
    CHECK(back.layers[i].output_bytes == m.layers[i].output_bytes);
  }
  auto bad = m;
  bad.layers.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = m;
  bad.layers[2].compute_weight = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("device profiles accept per-layer or cumulative latencies") {
  const auto a = device_from_json({{"device_id", "d"}, {"models", {{"tiny", {{"layer_ms", {1.0, 2.0, 3.0}}}}}}});
  const auto b =
      device_from_json({{"device_id", "d"}, {"models", {{"tiny", {{"cumulative_ms", {0.0, 1.0, 3.0, 6.0}}}}}}});
  CHECK(a.cumulative_ms == b.cumulative_ms);
  CHECK(a.mobile_ms("tiny", 0) == 0.0);
  CHECK(a.mobile_ms("tiny", 2) == doctest::Approx(3.0));
  CHECK(a.full_ms("tiny") == doctest::Approx(6.0));
  CHECK_THROWS_AS(a.mobile_ms("other", 0), ValidationError);
  CHECK_THROWS_AS(a.mobile_ms("tiny", 4), DomainError);
  CHECK_THROWS(device_from_json({{"device_id", "d"}, {"models", {{"tiny", {{"cumulative_ms", {1.0, 2.0}}}}}}}));
}

TEST_CASE("shipped models and devices load and agree on layer counts") {
  for (const char* dev : {"nano", "tx2"}) {
    const auto d = load_device(testing::data_dir() / "devices" / (std::string(dev) + ".json"));
    for (const char* id : {"inc", "res", "vgg", "mob", "vit"}) {
      const auto m = load_model(testing::data_dir() / "models" / (std::string(id) + ".json"));
      CHECK(d.cumulative_ms.at(id).size() == m.layers.size() + 1);
    }
  }
}
