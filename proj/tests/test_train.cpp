#include <catch2/catch_amalgamated.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "psh/psh.hpp"

using namespace psh;

namespace {

Dataset blob_corpus(std::size_t n, std::uint64_t seed) {
  Dataset ds = dataset_from_raw(synth_dataset(SynthKind::Blobs, n, seed, 8, 8), n);
  ds.split(n - n / 6, n / 6);
  return ds;
}

Dataset sector_corpus(std::size_t n, std::uint64_t seed) {
  Dataset ds =
      dataset_from_raw(synth_dataset(SynthKind::Sectors, n, seed, 8, 8), n);
  ds.split(n - n / 6, n / 6);
  return ds;
}

}  // namespace

TEST_CASE("zero steps produce no records", "[train]") {
  const Dataset ds = blob_corpus(60, 1);
  TrainOptions opt;
  opt.steps = 0;
  REQUIRE(train_run(ds, opt).empty());
}

TEST_CASE("training runs are deterministic in the seed", "[train]") {
  const Dataset ds = blob_corpus(240, 2);
  TrainOptions opt;
  opt.steps = 40;
  opt.checkpoint_every = 10;
  opt.seed = 5;

  const auto a = train_run(ds, opt);
  const auto b = train_run(ds, opt);
  REQUIRE(a.size() == 4);
  REQUIRE(b.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].batch == b[i].batch);
    REQUIRE(a[i].val_accuracy == b[i].val_accuracy);
    REQUIRE(a[i].loss == b[i].loss);
    REQUIRE(a[i].mode == "local");
  }
  for (std::size_t i = 1; i < a.size(); ++i) REQUIRE(a[i].batch > a[i - 1].batch);
  REQUIRE(a.back().batch == opt.steps);

  TrainOptions other = opt;
  other.seed = 6;
  REQUIRE(train_run(ds, other).back().loss != a.back().loss);
}

TEST_CASE("logistic regression separates the blob corpus", "[train]") {
  const Dataset ds = blob_corpus(360, 3);
  TrainOptions opt;
  opt.steps = 250;
  opt.lr = 0.5;
  opt.seed = 7;
  const auto records = train_run(ds, opt);
  REQUIRE(records.back().val_accuracy > 0.85);
}

TEST_CASE("one hidden layer helps on the sector corpus", "[train]") {
  const Dataset ds = sector_corpus(720, 4);
  TrainOptions opt;
  opt.steps = 500;
  opt.lr = 0.5;
  opt.seed = 8;
  opt.checkpoint_every = 500;

  const double log_acc = train_run(ds, opt).back().val_accuracy;
  opt.model = "dnn";
  opt.hidden = 32;
  const double mlp_acc = train_run(ds, opt).back().val_accuracy;
  INFO("logistic " << log_acc << " vs dnn " << mlp_acc);
  REQUIRE(mlp_acc > log_acc + 0.05);
}

TEST_CASE("framework logistic matches plain logistic", "[train]") {
  const Dataset ds = blob_corpus(240, 5);
  TrainOptions opt;
  opt.steps = 30;
  opt.checkpoint_every = 10;
  opt.lr = 0.5;
  opt.seed = 9;

  const auto local = train_run(ds, opt);
  opt.mode = "framework";
  const auto fw = train_run(ds, opt);
  REQUIRE(fw.size() == local.size());
  for (std::size_t i = 0; i < fw.size(); ++i) {
    REQUIRE(fw[i].batch == local[i].batch);
    REQUIRE(fw[i].mode == "framework");
    REQUIRE(std::abs(fw[i].val_accuracy - local[i].val_accuracy) < 0.02);
    REQUIRE(fw[i].loss == Catch::Approx(local[i].loss).margin(1e-6));
  }
}

TEST_CASE("framework dnn matches plain dnn", "[train]") {
  const Dataset ds = sector_corpus(120, 6);
  TrainOptions opt;
  opt.model = "dnn";
  opt.hidden = 8;
  opt.steps = 6;
  opt.checkpoint_every = 3;
  opt.lr = 0.5;
  opt.seed = 10;

  const auto local = train_run(ds, opt);
  opt.mode = "framework";
  const auto fw = train_run(ds, opt);
  REQUIRE(fw.size() == local.size());
  for (std::size_t i = 0; i < fw.size(); ++i) {
    REQUIRE(std::abs(fw[i].val_accuracy - local[i].val_accuracy) < 0.02);
    REQUIRE(fw[i].loss == Catch::Approx(local[i].loss).margin(1e-6));
  }
}

TEST_CASE("train_run validates its inputs", "[train]") {
  Dataset ds = dataset_from_raw(synth_dataset(SynthKind::Blobs, 30, 1, 4, 4), 30);
  TrainOptions opt;
  REQUIRE_THROWS_AS(train_run(ds, opt), DatasetError);  // no split yet
  ds.split(24, 6);
  opt.mode = "hybrid";
  REQUIRE_THROWS_AS(train_run(ds, opt), std::invalid_argument);
  opt.mode = "local";
  opt.model = "transformer";
  REQUIRE_THROWS_AS(train_run(ds, opt), std::invalid_argument);
}

TEST_CASE("run records survive the CSV codec", "[train][report]") {
  std::vector<RunRecord> recs = {
      {100, 0.125, 0.8125, 0.07624302, "local"},
      {200, 1.0 / 3.0, 0.9, 1e-17, "framework"},
      {300, 12345.678901234567, 1.0, -0.5, "socket run"},
  };
  const std::string text = records_to_csv(recs);
  REQUIRE(text.rfind("batch,elapsed_s,val_accuracy,loss,mode\n", 0) == 0);
  const auto back = records_from_csv(text);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    REQUIRE(back[i].batch == recs[i].batch);
    REQUIRE(back[i].elapsed_s == recs[i].elapsed_s);  // %.17g round-trips
    REQUIRE(back[i].val_accuracy == recs[i].val_accuracy);
    REQUIRE(back[i].loss == recs[i].loss);
    REQUIRE(back[i].mode == recs[i].mode);
  }

  REQUIRE(records_to_csv({}) == "batch,elapsed_s,val_accuracy,loss,mode\n");
  REQUIRE(records_from_csv("batch,elapsed_s,val_accuracy,loss,mode\n").empty());

  REQUIRE_THROWS_AS(records_from_csv("wrong,header\n1,2,3,4,x\n"), ReportError);
  REQUIRE_THROWS_AS(
      records_from_csv("batch,elapsed_s,val_accuracy,loss,mode\noops\n"),
      ReportError);
  REQUIRE_THROWS_AS(records_to_csv({{1, 0, 0, 0, "has,comma"}}), ReportError);
}

TEST_CASE("report merging and chart emission", "[train][report]") {
  const std::vector<RunRecord> a = {{100, 1, 0.5, 0.2, "local"}};
  const std::vector<RunRecord> b = {{100, 2, 0.6, 0.1, "framework"},
                                    {200, 4, 0.7, 0.05, "framework"}};
  const auto merged = merge_records({a, b});
  REQUIRE(merged.size() == 3);
  REQUIRE(merged[0].mode == "local");
  REQUIRE(merged[2].batch == 200);

  const nlohmann::json chart = records_to_vega(merged, "demo");
  REQUIRE(chart.at("data").at("values").size() == 3);
  REQUIRE(chart.at("encoding").at("x").at("field") == "batch");
  REQUIRE(chart.at("encoding").at("y").at("field") == "val_accuracy");
  REQUIRE(chart.at("encoding").at("color").at("field") == "mode");
  REQUIRE(chart.at("data").at("values")[1].at("mode") == "framework");
}
