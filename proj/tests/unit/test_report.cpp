#include "doctest_compat.hpp"

#include "ml_support.hpp"
#include "napa/error.hpp"
#include "napa/report.hpp"
#include "napa/synth.hpp"

#include <cmath>

using namespace napa;

namespace {

std::vector<SampleRecord> synth_records(std::size_t n) {
  SynthOptions o;
  o.count = n;
  o.seed = 12;
  o.spec.height = o.spec.width = 64;
  o.spec.bone_width = 3;
  std::vector<SampleRecord> out;
  for (const auto& s : synth_dataset(o)) out.push_back(s.record);
  return out;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("labels as predictions score 100 in every row") {
    const auto recs = synth_records(4);
    const auto r = evaluate_predictions(predictions_from_records(recs), recs, 0.25);
    const auto j = r.to_json();
    for (const char* g : kGroupNames) CHECK(j.at("rows").at(g) == 100.0);
    CHECK(j.at("rows").at("Total") == 100.0);
    CHECK(*r.mpjpe == 0.0);
    CHECK(*r.pa_mpjpe < 1e-6);
  }

  TEST_CASE("totals match an independent count from the per-joint distances") {
    const auto recs = synth_records(5);
    auto preds = predictions_from_records(recs);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 3.0);
    for (auto& p : preds)
      for (auto& c : p.pose.coords) c += Vec2(n(rng), n(rng));
    const auto j = evaluate_predictions(preds, recs, 0.25).to_json();
    std::size_t correct = 0, counted = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const double thr = 0.25 * recs[i].head_size();
      for (std::size_t k = 0; k < kNumJoints; ++k) {
        const double d = (preds[i].pose.coords[k] - recs[i].keypoints.coords[k]).norm();
        CHECK(j.at("per_image")[i].at("distances")[k].get<double>() == doctest::Approx(d));
        counted += 1;
        correct += d <= thr ? 1 : 0;
      }
    }
    CHECK(j.at("counts").at("Total").at("counted") == counted);
    CHECK(j.at("rows").at("Total").get<double>() == doctest::Approx(100.0 * correct / counted));
    std::size_t rows_correct = 0;
    for (const char* g : kGroupNames) rows_correct += j.at("counts").at(g).at("correct").get<std::size_t>();
    CHECK(rows_correct == correct);
  }

  TEST_CASE("table layout follows the joint-group rows") {
    const auto recs = synth_records(2);
    const auto table = evaluate_predictions(predictions_from_records(recs), recs, 0.25).to_table("w/o self_sup");
    std::size_t pos = 0;
    for (const char* g : {"Ankle", "Knee", "Wrist", "Elbow", "Shoulder", "Head", "Hip", "Total"}) {
      const auto at = table.find(g, pos);
      REQUIRE(at != std::string::npos);
      pos = at;
    }
    CHECK(table.find("PCKh@0.25") == 0);
    CHECK(table.find("w/o self_sup") != std::string::npos);
    CHECK(table.find("100.0") != std::string::npos);
  }

  TEST_CASE("ensemble averaging") {
    const auto recs = synth_records(3);
    const auto truth = predictions_from_records(recs);
    auto plus = truth, minus = truth;
    for (std::size_t i = 0; i < truth.size(); ++i)
      for (std::size_t k = 0; k < kNumJoints; ++k) {
        plus[i].pose.coords[k] += Vec2(2, -2);
        minus[i].pose.coords[k] -= Vec2(2, -2);
      }
    const auto avg = average_predictions({plus, minus});
    for (std::size_t i = 0; i < truth.size(); ++i)
      for (std::size_t k = 0; k < kNumJoints; ++k) CHECK((avg[i].pose.coords[k] - truth[i].pose.coords[k]).norm() < 1e-12);
    const auto one = average_predictions({plus});
    CHECK(evaluate_predictions(one, recs, 0.25).to_json().at("rows") ==
          evaluate_predictions(plus, recs, 0.25).to_json().at("rows"));
    CHECK(evaluate_predictions(average_predictions({plus, plus}), recs, 0.25).to_json().at("rows") ==
          evaluate_predictions(plus, recs, 0.25).to_json().at("rows"));
    CHECK_THROWS_AS(average_predictions({}), ConfigError);
    auto shuffled = minus;
    std::swap(shuffled[0], shuffled[1]);
    CHECK_THROWS_AS(average_predictions({plus, shuffled}), ConfigError);
  }

  TEST_CASE("prediction files roundtrip; missing predictions are an error") {
    const auto recs = synth_records(3);
    auto preds = predictions_from_records(recs);
    preds[1].pose.visible[4] = false;
    const auto dir = testing::scratch_dir("preds");
    save_predictions(dir / "p.jsonl", preds);
    const auto back = load_predictions(dir / "p.jsonl");
    REQUIRE(back.size() == 3);
    CHECK(back[1].pose.visible[4] == false);
    CHECK(back[2].pose.coords[7] == preds[2].pose.coords[7]);
    CHECK(*back[0].depth_rel == *preds[0].depth_rel);
    preds.pop_back();
    CHECK_THROWS_AS(evaluate_predictions(preds, recs, 0.25), ConfigError);
  }

  TEST_CASE("config hash is stable and sensitive") {
    const nlohmann::json a = {{"x", 1}, {"y", "z"}};
    CHECK(config_hash(a) == config_hash(nlohmann::json::parse(a.dump())));
    CHECK(config_hash(a).size() == 16);
    CHECK(config_hash(a) != config_hash({{"x", 2}, {"y", "z"}}));
  }

  TEST_CASE("predictions map back to original image coordinates") {
    const auto dir = testing::scratch_dir("predict_records");
    SynthOptions o;
    o.count = 2;
    o.seed = 4;
    o.spec.height = o.spec.width = 64;
    const auto manifest = write_synth_dataset(dir, o);
    const auto recs = load_manifest(manifest);
    Pipeline p(testing::tiny_pipeline_config(32));
    const auto preds = predict_records(p, manifest, recs, true);
    REQUIRE(preds.size() == 2);
    const auto samples = load_samples(manifest, recs, 32);
    const auto at_input = p.predict_2d(samples[0].image.unsqueeze(0)).coords[0];
    CHECK(preds[0].pose.coords[3].x() == doctest::Approx(2.0 * at_input[3][0].item<double>()).epsilon(1e-6));
    CHECK(preds[0].depth_rel->at(0) == 0.0);
  }
}
