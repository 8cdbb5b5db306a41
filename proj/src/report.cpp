#include "eapcr/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eapcr/error.hpp"

namespace eapcr::io {

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string mean_sd(const eval::Aggregate& a) { return fixed3(a.mean) + " ± " + fixed3(a.sd); }

json aggregate_json(const eval::Aggregate& a) { return json{{"mean", a.mean}, {"sd", a.sd}, {"count", a.count}}; }

json metrics_json(const eval::Metrics& m) {
  json j{{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}};
  j["r2"] = m.r2 ? json(*m.r2) : json(nullptr);
  return j;
}

std::string pad(std::string s, std::size_t width) {
  // "±" and "²" are two bytes but one column
  std::size_t cols = 0;
  for (unsigned char c : s) cols += (c & 0xC0) != 0x80;
  if (cols < width) s.append(width - cols, ' ');
  return s;
}

std::string cell_text(const Assignment& cell) {
  std::string s;
  for (const auto& [k, v] : cell) s += (s.empty() ? "" : " ") + k + "=" + format_value(v);
  return s.empty() ? "(base)" : s;
}

}  // namespace

std::string format_value(double v) {
  char buf[64];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%g", v);
  }
  return buf;
}

json report_to_json(const eval::MetricsReport& r) {
  json runs = json::array();
  for (const auto& run : r.runs) {
    json curve = json::array();
    for (const auto& p : run.curve) {
      curve.push_back(json{{"epoch", p.epoch},
                           {"train_mse", p.train_mse},
                           {"val_mse", p.val_mse ? json(*p.val_mse) : json(nullptr)}});
    }
    runs.push_back(json{{"label", run.label},
                        {"seed", run.seed},
                        {"fold", run.fold},
                        {"n_train", run.n_train},
                        {"n_test", run.n_test},
                        {"metrics", metrics_json(run.metrics)},
                        {"best_epoch", run.best_epoch},
                        {"epochs_run", run.curve.size()}});
  }
  json j{{"model", r.model},
         {"target", r.target},
         {"split", r.split},
         {"config_hash", r.config_hash},
         {"summary",
          {{"mae", aggregate_json(r.mae)},
           {"mse", aggregate_json(r.mse)},
           {"rmse", aggregate_json(r.rmse)},
           {"r2", r.r2 ? aggregate_json(*r.r2) : json(nullptr)}}},
         {"pooled", metrics_json(r.pooled)},
         {"runs", std::move(runs)},
         {"notes", r.notes}};
  return j;
}

std::string render_table(const eval::MetricsReport& r) {
  std::ostringstream out;
  out << "model: " << r.model << "   target: " << r.target << "   split: " << r.split << "   runs: " << r.runs.size();
  if (!r.config_hash.empty()) out << "   config: " << r.config_hash;
  out << "\n\n";
  out << pad("metric", 8) << "mean ± sd\n";
  out << pad("MAE", 8) << mean_sd(r.mae) << "\n";
  out << pad("MSE", 8) << mean_sd(r.mse) << "\n";
  out << pad("RMSE", 8) << mean_sd(r.rmse) << "\n";
  out << pad("R²", 8) << (r.r2 ? mean_sd(*r.r2) : std::string("undefined")) << "\n";
  if (r.r2 && r.r2->count < r.runs.size()) {
    out << "  (R² undefined in " << r.runs.size() - r.r2->count << " run(s) with constant test targets)\n";
  }
  out << "\n" << pad("run", 20) << pad("n_test", 8) << pad("MAE", 10) << pad("RMSE", 10) << pad("R²", 10)
      << "best_epoch\n";
  for (const auto& run : r.runs) {
    out << pad(run.label, 20) << pad(std::to_string(run.n_test), 8) << pad(fixed3(run.metrics.mae), 10)
        << pad(fixed3(run.metrics.rmse), 10) << pad(run.metrics.r2 ? fixed3(*run.metrics.r2) : "n/a", 10)
        << run.best_epoch << "\n";
  }
  for (const auto& n : r.notes) out << "note: " << n << "\n";
  return out.str();
}

std::string predictions_csv(const eval::MetricsReport& r) {
  std::string s = "run,row,y_true,y_pred\n";
  for (const auto& p : r.predictions) s += p.run + "," + std::to_string(p.row) + "," + full(p.y_true) + "," + full(p.y_pred) + "\n";
  return s;
}

std::string curves_csv(const eval::MetricsReport& r) {
  std::string s = "run,epoch,train_mse,val_mse\n";
  for (const auto& run : r.runs) {
    for (const auto& p : run.curve) {
      s += run.label + "," + std::to_string(p.epoch) + "," + full(p.train_mse) + "," +
           (p.val_mse ? full(*p.val_mse) : std::string()) + "\n";
    }
  }
  return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void emit_report(const eval::MetricsReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_text_file(dir / "report.txt", render_table(report));
  write_text_file(dir / "predictions.csv", predictions_csv(report));
  write_text_file(dir / "curves.csv", curves_csv(report));
}

std::string render_sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << pad("cell", 26) << pad("MAE", 18) << pad("RMSE", 18) << pad("R²", 18) << "runs\n";
  for (const auto& row : rows) {
    out << pad(cell_text(row.cell), 26);
    if (!row.report) {
      out << "FAILED: " << row.error << "\n";
      continue;
    }
    const auto& r = *row.report;
    out << pad(mean_sd(r.mae), 18) << pad(mean_sd(r.rmse), 18) << pad(r.r2 ? mean_sd(*r.r2) : "undefined", 18)
        << r.runs.size() << "\n";
  }
  return out.str();
}

json sweep_to_json(const std::vector<SweepRow>& rows) {
  json cells = json::array();
  for (const auto& row : rows) {
    json c{{"cell", row.cell}, {"directory", row.directory}};
    if (row.report) {
      const auto& r = *row.report;
      c["status"] = "ok";
      c["config_hash"] = r.config_hash;
      c["mae"] = aggregate_json(r.mae);
      c["mse"] = aggregate_json(r.mse);
      c["rmse"] = aggregate_json(r.rmse);
      c["r2"] = r.r2 ? aggregate_json(*r.r2) : json(nullptr);
    } else {
      c["status"] = "failed";
      c["error"] = row.error;
    }
    cells.push_back(std::move(c));
  }
  return json{{"cells", std::move(cells)}};
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::vector<std::string> params;
  if (!rows.empty()) {
    for (const auto& [k, _] : rows.front().cell) params.push_back(k);
  }
  std::string s;
  for (const auto& p : params) s += p + ",";
  s += "status,mae_mean,mae_sd,mse_mean,mse_sd,rmse_mean,rmse_sd,r2_mean,r2_sd,runs\n";
  for (const auto& row : rows) {
    for (const auto& p : params) s += format_value(row.cell.at(p)) + ",";
    if (!row.report) {
      s += "failed,,,,,,,,,\n";
      continue;
    }
    const auto& r = *row.report;
    s += "ok," + full(r.mae.mean) + "," + full(r.mae.sd) + "," + full(r.mse.mean) + "," + full(r.mse.sd) + "," +
         full(r.rmse.mean) + "," + full(r.rmse.sd) + ",";
    s += r.r2 ? full(r.r2->mean) + "," + full(r.r2->sd) : std::string(",");
    s += "," + std::to_string(r.runs.size()) + "\n";
  }
  return s;
}

void emit_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "sweep.txt", render_sweep_table(rows));
  write_text_file(dir / "sweep.json", sweep_to_json(rows).dump(2) + "\n");
  write_text_file(dir / "sweep.csv", sweep_csv(rows));
}

}  // namespace eapcr::io
