#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "eapcr/checkpoint.hpp"
#include "eapcr/config.hpp"
#include "eapcr/csv.hpp"
#include "eapcr/error.hpp"
#include "eapcr/experiment.hpp"
#include "eapcr/report.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace eapcr::io;
namespace fs = std::filesystem;
using eapcr::features::ColumnKind;
using eapcr::features::FeatureSchema;

namespace {

FeatureSchema small_schema() {
  FeatureSchema s;
  s.columns = {{"metal", ColumnKind::Categorical, 0}, {"temp", ColumnKind::Numerical, 2}};
  s.targets = {"yield"};
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_dataset_csv(const eapcr::eval::Dataset& d, const fs::path& path) {
  std::ofstream out(path);
  for (const auto& c : d.schema.columns) out << c.name << ",";
  out << d.schema.targets[0] << "\n";
  out.precision(17);
  for (const auto& r : d.rows) {
    for (const auto& v : r.features) {
      if (const auto* s = std::get_if<std::string>(&v)) out << *s << ",";
      else if (const auto* x = std::get_if<double>(&v)) out << *x << ",";
      else out << ",";
    }
    out << r.targets[0] << "\n";
  }
}

void write_schema(const FeatureSchema& s, const fs::path& path) {
  std::ofstream(path) << schema_file_to_json(SchemaFile{s, std::nullopt, std::nullopt}).dump(2);
}

// A small trained model plus the pipeline it was fitted with.
Checkpoint tiny_checkpoint(const eapcr::eval::Dataset& d) {
  const auto pipeline = eapcr::features::fit_pipeline(d.rows, d.schema);
  eapcr::model::ModelConfig mc;
  mc.cardinalities = pipeline.cardinalities();
  mc.embed_size = 4;
  mc.mlp_hidden = {8};
  eapcr::train::TrainConfig tc;
  tc.max_epochs = 5;
  tc.early_stopping = false;
  std::vector<double> y;
  for (const auto& r : d.rows) y.push_back(r.targets[0]);
  auto result = eapcr::train::train(eapcr::features::transform_rows(d.rows, pipeline), y, mc, tc);
  return Checkpoint{"y", pipeline, result.scaler, result.params};
}

ExperimentConfig fixture_config(const fs::path& dir, std::size_t rows = 40) {
  const auto d = synthetic::mixed_dataset(rows, 11);
  write_dataset_csv(d, dir / "data.csv");
  write_schema(d.schema, dir / "schema.json");
  ExperimentConfig c;
  c.data_path = dir / "data.csv";
  c.schema_path = dir / "schema.json";
  c.model.embed_size = 4;
  c.model.mlp_hidden = {8};
  c.train.max_epochs = 4;
  c.seeds = {0, 1};
  c.output_dir = dir / "out";
  return c;
}

}  // namespace

TEST_CASE("csv line splitting") {
  CHECK(split_csv_line("a, b ,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_csv_line("\"x, y\",2,") == std::vector<std::string>{"x, y", "2", ""});
  CHECK(split_csv_line("\"say \"\"hi\"\"\"") == std::vector<std::string>{"say \"hi\""});
}

TEST_CASE("csv ingestion") {
  const FeatureSchema s = small_schema();
  std::istringstream three("metal,temp,yield\nCu,300,0.5\nNi,,0.7\nCu,450,0.9\n");
  const LoadedTable t = parse_csv(three, s);
  CHECK(t.rows.size() == 3);
  CHECK(t.missing_cells == 1);
  CHECK(eapcr::features::is_missing(t.rows[1].features[1]));
  CHECK(std::get<double>(t.rows[2].features[1]) == 450.0);

  std::istringstream shuffled("yield,extra,temp,metal\n0.5,z,300,Cu\n0.7,z,,Ni\n0.9,z,450,Cu\n");
  const LoadedTable u = parse_csv(shuffled, s);
  REQUIRE(u.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(u.rows[i].features == t.rows[i].features);
    CHECK(u.rows[i].targets == t.rows[i].targets);
  }

  std::istringstream missing("temp\n1\n");
  try {
    parse_csv(missing, s, {}, "f.csv");
    FAIL("expected a schema error");
  } catch (const eapcr::SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("metal") != std::string::npos);
    CHECK(msg.find("yield") != std::string::npos);
  }

  std::istringstream bad("metal,temp,yield\nCu,300,0.5\nCu,hot,0.5\n");
  try {
    parse_csv(bad, s, {}, "f.csv");
    FAIL("expected a data error");
  } catch (const eapcr::DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("f.csv:3") != std::string::npos);
    CHECK(msg.find("temp") != std::string::npos);
  }

  std::istringstream no_target("metal,temp\nCu,1\n");
  CsvOptions lenient;
  lenient.require_targets = false;
  const LoadedTable nt = parse_csv(no_target, s, lenient);
  CHECK(std::isnan(nt.rows[0].targets[0]));
}

TEST_CASE("photocatalysis-shaped fixture has nine features") {
  const SchemaFile f = load_schema_file(fs::path(EAPCR_SOURCE_DIR) / "schemas" / "photocatalysis_tio2.json");
  CHECK(f.schema.n() == 9);
  CHECK(f.schema.targets == std::vector<std::string>{"Degradation rate"});
  std::istringstream csv(
      "Dopant,Dopant/Ti mole ratio,Calcination temperature,Pollutant,Catalyst/Pollutant mass ratio,pH,"
      "Experimental temperature,Light wavelength,Illumination time,Degradation rate\n"
      "N,0.05,450,Methyl orange,100,7,25,365,60,0.81\n"
      "Ag,0.01,500,Phenol,50,3,30,254,120,0.64\n");
  const LoadedTable t = parse_csv(csv, f.schema);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].features.size() == 9);
  CHECK(std::get<std::string>(t.rows[1].features[3]) == "Phenol");
  CHECK(t.rows[1].targets[0] == 0.64);
}

TEST_CASE("config parsing") {
  const json j = json::parse(R"({
    "data": "d.csv", "schema": "s.json", "split": {"k_fold": 5},
    "model": {"embed_size": 16}, "train": {"max_epochs": 7, "early_stopping": false},
    "sweep": [{"param": "n_bins", "values": [14, 8]}], "seeds": [3], "workers": 2
  })");
  const ExperimentConfig c = config_from_json(j, "/base");
  CHECK(c.data_path == fs::path("/base/d.csv"));
  CHECK(c.split == eapcr::features::SplitSpec::kfold(5));
  CHECK(c.model.embed_size == 16);
  CHECK(c.train.max_epochs == 7);
  CHECK_FALSE(c.train.early_stopping);
  CHECK(c.seeds == std::vector<std::uint64_t>{3});

  CHECK_THROWS_AS(config_from_json(json::parse(R"({"lr": 1})")), eapcr::ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seeds": []})")), eapcr::ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sweep": [{"param": "colour", "values": [1]}]})")),
                  eapcr::ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sweep": [{"param": "n_bins", "values": [2.5]}]})")),
                  eapcr::ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"split": {"ratio": 0.7, "k_fold": 3}})")), eapcr::ConfigError);

  const ExperimentConfig round = config_from_json(config_to_json(c));
  CHECK(config_hash(round) == config_hash(c));
}

TEST_CASE("sweep grid") {
  CHECK(sweep_grid({}).size() == 1);
  CHECK(sweep_grid({}).front().empty());
  const auto g = sweep_grid({{"embed_size", {32, 8, 16}}, {"n_bins", {4, 2}}});
  REQUIRE(g.size() == 6);
  CHECK(g[0].at("embed_size") == 8);
  CHECK(g[0].at("n_bins") == 2);
  CHECK(g[1].at("n_bins") == 4);
  CHECK(g[5].at("embed_size") == 32);

  ExperimentConfig base;
  base.sweep = {{"embed_size", {8, 16}}};
  const ExperimentConfig cell = apply_assignment(base, g[3]);
  CHECK(cell.model.embed_size == 16);
  CHECK(cell.n_bins == 4);
  CHECK(cell.sweep.empty());

  ExperimentConfig moved = cell;
  moved.output_dir = "elsewhere";
  moved.workers = 8;
  CHECK(config_hash(moved) == config_hash(cell));
  moved.train.learning_rate = 0.5;
  CHECK(config_hash(moved) != config_hash(cell));
  CHECK(config_hash(cell).size() == 16);
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto d = synthetic::mixed_dataset(10, 3, 2);
  const Checkpoint ckpt = tiny_checkpoint(d);
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(ckpt));

  CHECK(back.target == ckpt.target);
  CHECK(back.scaler == ckpt.scaler);
  CHECK(back.params.config == ckpt.params.config);
  CHECK(back.pipeline.vocab == ckpt.pipeline.vocab);
  CHECK(back.pipeline.discretizers == ckpt.pipeline.discretizers);
  const auto a = ckpt.params.tensors(), b = back.params.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].shape() == b[i].shape());
    CHECK(std::memcmp(a[i].data().data(), b[i].data().data(), a[i].numel() * sizeof(double)) == 0);
  }
  const auto x = eapcr::features::transform_rows(d.rows, ckpt.pipeline);
  const auto x2 = eapcr::features::transform_rows(d.rows, back.pipeline);
  CHECK(eapcr::train::predict_targets(x, ckpt.params, ckpt.scaler) ==
        eapcr::train::predict_targets(x2, back.params, back.scaler));
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));
}

TEST_CASE("checkpoint corruption is detected") {
  TempDir tmp("ckpt");
  const auto d = synthetic::mixed_dataset(10, 4, 2);
  const std::string bytes = serialize_checkpoint(tiny_checkpoint(d));

  std::string flipped = bytes;
  flipped[bytes.size() - 12] ^= 0x5A;  // last tensor: 8 value bytes, then the checksum
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), eapcr::IntegrityError);
  write_text_file(tmp.path / "flipped.ckpt", flipped);
  const VerifyResult v = verify_checkpoint(tmp.path / "flipped.ckpt");
  CHECK_FALSE(v.ok);
  REQUIRE_FALSE(v.problems.empty());
  CHECK(v.problems[0].find("checksum") != std::string::npos);

  std::string bumped = bytes;
  bumped[8] = static_cast<char>(kCheckpointVersion + 1);
  CHECK_THROWS_AS(deserialize_checkpoint(bumped), eapcr::FormatError);

  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(magic), eapcr::FormatError);

  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), eapcr::IntegrityError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, 30)), eapcr::IntegrityError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), eapcr::IntegrityError);

  save_checkpoint(tmp.path / "good.ckpt", deserialize_checkpoint(bytes));
  const VerifyResult ok = verify_checkpoint(tmp.path / "good.ckpt");
  CHECK(ok.ok);
  CHECK(ok.version == kCheckpointVersion);
  CHECK(ok.tensors == 15);
  CHECK_FALSE(verify_checkpoint(tmp.path / "absent.ckpt").ok);
}

TEST_CASE("report rendering") {
  eapcr::eval::MetricsReport r;
  r.model = "eapcr";
  r.target = "y";
  r.split = "holdout:0.7";
  eapcr::eval::RunMetrics run;
  run.label = "seed=0";
  run.n_test = 3;
  run.metrics = eapcr::eval::compute_metrics(std::vector<double>{1, 2, 3}, std::vector<double>{1.5, 2, 2});
  r.runs.push_back(run);
  r.predictions = {{"seed=0", 4, 1, 1.5}, {"seed=0", 0, 2, 2}, {"seed=0", 2, 3, 2}};
  r.finalize();

  const std::string table = render_table(r);
  CHECK(table.find("MAE     0.500 ± 0.000") != std::string::npos);
  CHECK(table.find("R²      0.375 ± 0.000") != std::string::npos);

  const json j = report_to_json(r);
  CHECK(j["summary"]["mae"]["mean"].get<double>() == r.mae.mean);
  CHECK(j["summary"]["r2"]["sd"].get<double>() == 0.0);
  // the table shows exactly the JSON values, rounded
  char buf[32];
  for (const char* m : {"mae", "mse", "rmse", "r2"}) {
    std::snprintf(buf, sizeof buf, "%.3f ± %.3f", j["summary"][m]["mean"].get<double>(),
                  j["summary"][m]["sd"].get<double>());
    CHECK(table.find(buf) != std::string::npos);
  }

  const std::string dump = predictions_csv(r);
  CHECK(std::count(dump.begin(), dump.end(), '\n') == 1 + 3);
  CHECK(dump.find("seed=0,4,1,1.5\n") != std::string::npos);
}

TEST_CASE("experiment with an empty sweep writes a single report") {
  TempDir tmp("single");
  ExperimentConfig c = fixture_config(tmp.path);
  const ExperimentResult r = run_experiment(c);
  CHECK(r.exit_code == kExitOk);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.rows[0].report.has_value());
  for (const char* f : {"report.json", "report.txt", "predictions.csv", "curves.csv", "config.json"}) {
    CHECK(fs::exists(c.output_dir / f));
  }
  CHECK(fs::exists(c.output_dir / "checkpoints" / "seed_1.ckpt"));
  CHECK_FALSE(fs::exists(c.output_dir / "sweep.txt"));

  const std::string dump = slurp(c.output_dir / "predictions.csv");
  CHECK(static_cast<std::size_t>(std::count(dump.begin(), dump.end(), '\n')) == 1 + 2 * 12);

  const PredictionTable p = predict_from_checkpoint(c.output_dir / "checkpoints" / "seed_0.ckpt", c.data_path);
  CHECK(p.y_pred.size() == 40);
  CHECK(p.y_true[0] == synthetic::mixed_dataset(40, 11).rows[0].targets[0]);
}

TEST_CASE("sweep records failing cells and still runs the rest") {
  TempDir tmp("sweep");
  ExperimentConfig c = fixture_config(tmp.path, 30);
  c.save_checkpoints = false;
  c.seeds = {0};
  c.workers = 2;
  c.sweep = {{"n_bins", {2, 40, 3}}};  // 40 bins cannot be fitted on 21 training rows
  const ExperimentResult r = run_experiment(c);
  CHECK(r.exit_code == kExitConfigOrData);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].cell.at("n_bins") == 2);
  CHECK(r.rows[1].cell.at("n_bins") == 3);
  CHECK(r.rows[2].cell.at("n_bins") == 40);
  CHECK(r.rows[0].report.has_value());
  CHECK(r.rows[1].report.has_value());
  CHECK_FALSE(r.rows[2].report.has_value());
  CHECK(r.rows[2].error.find("at least 40") != std::string::npos);

  const std::string table = slurp(c.output_dir / "sweep.txt");
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);
  CHECK(table.find("FAILED") != std::string::npos);
  CHECK(fs::exists(c.output_dir / "cell_000_n_bins=2" / "report.json"));
  const json agg = json::parse(slurp(c.output_dir / "sweep.json"));
  CHECK(agg["cells"].size() == 3);
  CHECK(agg["cells"][2]["status"] == "failed");
}

TEST_CASE("experiments are reproducible byte for byte") {
  TempDir a("rep_a"), b("rep_b");
  ExperimentConfig ca = fixture_config(a.path), cb = fixture_config(b.path);
  cb.data_path = ca.data_path;
  cb.schema_path = ca.schema_path;
  ca.sweep = cb.sweep = {{"embed_size", {2, 3}}};
  ca.workers = 1;
  cb.workers = 2;
  run_experiment(ca);
  run_experiment(cb);
  for (const char* cell : {"cell_000_embed_size=2", "cell_001_embed_size=3"}) {
    for (const char* f : {"report.json", "report.txt", "predictions.csv", "curves.csv"}) {
      CHECK(slurp(ca.output_dir / cell / f) == slurp(cb.output_dir / cell / f));
    }
    CHECK(slurp(ca.output_dir / cell / "checkpoints" / "seed_0.ckpt") ==
          slurp(cb.output_dir / cell / "checkpoints" / "seed_0.ckpt"));
  }
  CHECK(slurp(ca.output_dir / "sweep.csv") == slurp(cb.output_dir / "sweep.csv"));
}

TEST_CASE("baseline run and data errors") {
  TempDir tmp("base");
  ExperimentConfig c = fixture_config(tmp.path);
  const auto report = run_baseline(c);
  CHECK(report.model == "ridge");
  CHECK(fs::exists(c.output_dir / "report.json"));

  c.target = "nope";
  CHECK_THROWS_AS(run_baseline(c), eapcr::ConfigError);
  c.target.clear();
  c.data_path = tmp.path / "missing.csv";
  const ExperimentResult r = [&] {
    try {
      return run_experiment(c);
    } catch (const eapcr::DataError&) {
      return ExperimentResult{{}, kExitConfigOrData};
    }
  }();
  CHECK(r.exit_code == kExitConfigOrData);
}
