#include "eapcr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "eapcr/error.hpp"

namespace eapcr::train {

namespace ad = eapcr::autodiff;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (early_stopping && !(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
}

TargetScaler TargetScaler::fit(std::span<const double> targets) {
  if (targets.empty()) throw FitError("cannot fit a target scaler on zero rows");
  const double n = static_cast<double>(targets.size());
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double ss = 0.0;
  for (double y : targets) ss += (y - mean) * (y - mean);
  const double sd = std::sqrt(ss / n);
  return TargetScaler{mean, sd > 0.0 ? sd : 1.0};
}

std::vector<double> TargetScaler::transform(std::span<const double> ys) const {
  std::vector<double> out(ys.size());
  std::transform(ys.begin(), ys.end(), out.begin(), [this](double y) { return transform(y); });
  return out;
}

std::vector<double> TargetScaler::inverse(std::span<const double> zs) const {
  std::vector<double> out(zs.size());
  std::transform(zs.begin(), zs.end(), out.begin(), [this](double z) { return inverse(z); });
  return out;
}

// ---------------------------------------------------------------------------

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

AdamResult adam_step(std::span<const Tensor> params, std::span<const Tensor> grads, const AdamState& state,
                     double learning_rate, std::span<const std::string> names) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment counts differ");
  }
  AdamResult out;
  out.state.step = state.step + 1;
  const double t = static_cast<double>(out.state.step);
  const double bc1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double bc2 = 1.0 - std::pow(AdamState::kBeta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string label = i < names.size() ? names[i] : "#" + std::to_string(i);
    if (grads[i].shape() != params[i].shape() || state.m[i].size() != params[i].numel() ||
        state.v[i].size() != params[i].numel()) {
      throw DimensionError("adam_step: shape mismatch for parameter " + label);
    }
    if (!grads[i].all_finite()) throw NumericError("non-finite gradient for parameter tensor '" + label + "'");

    const auto p = params[i].data();
    const auto g = grads[i].data();
    std::vector<double> m(p.size()), v(p.size()), updated(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = AdamState::kBeta1 * state.m[i][k] + (1.0 - AdamState::kBeta1) * g[k];
      v[k] = AdamState::kBeta2 * state.v[i][k] + (1.0 - AdamState::kBeta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      updated[k] = p[k] - learning_rate * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
    out.params.emplace_back(params[i].shape(), std::move(updated), params[i].requires_grad());
    out.state.m.push_back(std::move(m));
    out.state.v.push_back(std::move(v));
  }
  return out;
}

Tensor mse_loss(Graph& g, const Tensor& predictions, const Tensor& targets) {
  if (predictions.shape() != targets.shape()) {
    throw DimensionError("mse_loss: predictions " + ad::shape_str(predictions.shape()) + " vs targets " +
                         ad::shape_str(targets.shape()));
  }
  const Tensor diff = ad::sub(g, predictions, targets);
  return ad::mean(g, ad::mul(g, diff, diff));
}

// ---------------------------------------------------------------------------

namespace {

double mse_of(const std::vector<features::EncodedRow>& rows, std::span<const std::size_t> idx,
              std::span<const double> scaled_targets, const model::EapcrParams& params,
              const model::PermutationSpec& spec) {
  double acc = 0.0;
  for (std::size_t i : idx) {
    Graph g(ad::GraphMode::Inference);
    const double r = model::forward(g, rows[i], params, spec).prediction[0] - scaled_targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(idx.size());
}

}  // namespace

TrainResult train(const std::vector<features::EncodedRow>& rows, std::span<const double> targets,
                  const model::ModelConfig& model_config, const TrainConfig& config) {
  return train_from(model::init_params(model_config, config.seed), rows, targets, config);
}

TrainResult train_from(const model::EapcrParams& initial, const std::vector<features::EncodedRow>& rows,
                       std::span<const double> targets, const TrainConfig& config) {
  config.validate();
  if (rows.empty()) throw ConfigError("training split is empty");
  if (rows.size() != targets.size()) throw DimensionError("rows and targets differ in length");
  const model::PermutationSpec spec = model::build_permutation(initial.config.n());

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> fit_idx(rows.size()), val_idx;
  std::iota(fit_idx.begin(), fit_idx.end(), std::size_t{0});
  if (config.early_stopping && rows.size() >= 2) {
    std::shuffle(fit_idx.begin(), fit_idx.end(), rng);
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(rows.size()))));
    if (n_val < rows.size()) {
      val_idx.assign(fit_idx.end() - static_cast<long>(n_val), fit_idx.end());
      fit_idx.resize(rows.size() - n_val);
      std::sort(fit_idx.begin(), fit_idx.end());
      std::sort(val_idx.begin(), val_idx.end());
    } else {
      std::sort(fit_idx.begin(), fit_idx.end());
    }
  }

  TrainResult result;
  if (config.scale_targets) {
    std::vector<double> fit_targets;
    for (std::size_t i : fit_idx) fit_targets.push_back(targets[i]);
    result.scaler = TargetScaler::fit(fit_targets);
  }
  const std::vector<double> scaled = result.scaler.transform(targets);

  model::EapcrParams params = initial;
  const std::vector<std::string> names = params.names();
  AdamState state = AdamState::zeros_like(params.tensors());
  const std::size_t batch = std::min(config.batch_size, fit_idx.size());

  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order = fit_idx;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t end = std::min(order.size(), start + batch);
        Graph g;
        std::vector<Tensor> preds;
        std::vector<double> ys;
        for (std::size_t k = start; k < end; ++k) {
          preds.push_back(model::forward(g, rows[order[k]], params, spec).prediction);
          ys.push_back(scaled[order[k]]);
        }
        const Tensor loss = mse_loss(g, ad::concat(g, preds, 0), Tensor::vector(std::move(ys)));
        if (!std::isfinite(loss.item())) throw NumericError("non-finite training loss");
        g.backward(loss);

        const std::vector<Tensor> current = params.tensors();
        std::vector<Tensor> grads;
        grads.reserve(current.size());
        for (const auto& t : current) grads.push_back(g.grad(t));
        AdamResult step = adam_step(current, grads, state, config.learning_rate, names);
        params = params.with_tensors(step.params);
        state = std::move(step.state);
        loss_sum += loss.item() * static_cast<double>(end - start);
      }
    } catch (const NumericError& e) {
      result.aborted = "epoch " + std::to_string(epoch) + ": " + e.what();
      if (val_idx.empty()) result.best_epoch = epoch - 1;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = loss_sum / static_cast<double>(order.size());
    if (!val_idx.empty()) {
      const double val = mse_of(rows, val_idx, scaled, params, spec);
      rec.val_mse = val;
      if (val < best_val) {
        best_val = val;
        result.params = params;
        result.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      result.params = params;
      result.best_epoch = epoch;
    }
    result.curve.push_back(rec);
    if (!val_idx.empty() && since_best >= config.patience) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return result;
}

std::vector<double> predict_targets(const std::vector<features::EncodedRow>& rows, const model::EapcrParams& params,
                                    const TargetScaler& scaler) {
  const model::PermutationSpec spec = model::build_permutation(params.config.n());
  return scaler.inverse(model::predict(rows, params, spec));
}

}  // namespace eapcr::train
