#include "pgdenoise/blindspot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pgdenoise/errors.hpp"
#include "pgdenoise/num_format.hpp"

namespace pgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Flat weight vector layout: per trunk layer, row-major W (out x in) then
// bias; then the mu head (weights + bias) and the log-variance head.
struct Layout {
  std::vector<int> sizes;  // input, hidden...
  std::vector<size_t> w_off, b_off;
  size_t mu_w = 0, mu_b = 0, lv_w = 0, lv_b = 0;
  size_t total = 0;

  explicit Layout(const BlindspotPredictor& m) {
    sizes.push_back(m.input_dim());
    for (int h : m.hidden_sizes) sizes.push_back(h);
    size_t off = 0;
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
      w_off.push_back(off);
      off += static_cast<size_t>(sizes[l + 1]) * sizes[l];
      b_off.push_back(off);
      off += sizes[l + 1];
    }
    const size_t last = sizes.back();
    mu_w = off;
    off += last;
    mu_b = off++;
    lv_w = off;
    off += last;
    lv_b = off++;
    total = off;
  }
};

struct LossGrad {
  double loss = 0.0;
  double d_mu = 0.0;
  double d_lv = 0.0;
  double d_a = 0.0;
  double d_b = 0.0;
};

LossGrad eval_loss(LossKind kind, double y, double mu, double lv, double a, double b,
                   double lambda_reg) {
  LossGrad g;
  const double r = y - mu;
  if (kind == LossKind::uncalibrated) {
    const double inv = std::exp(-lv);
    g.loss = r * r * inv + lv;
    g.d_mu = -2.0 * r * inv;
    g.d_lv = -r * r * inv + 1.0;
    return g;
  }
  const double sigma2 = std::exp(lv);
  double total, a_eff;
  switch (kind) {
    case LossKind::gaussian:
      total = b + sigma2;
      a_eff = 0.0;
      break;
    case LossKind::poisson:
      total = a * mu + sigma2;
      a_eff = a;
      break;
    default:  // pg_marginal, pg_regularized
      total = a * mu + b + sigma2;
      a_eff = a;
      break;
  }
  if (!(total > 0)) {
    g.loss = kInf;
    return g;
  }
  const double dT = 1.0 / total - r * r / (total * total);
  g.loss = r * r / total + std::log(total);
  g.d_mu = -2.0 * r / total + a_eff * dT;
  g.d_lv = sigma2 * dT;
  g.d_a = kind == LossKind::gaussian ? 0.0 : mu * dT;
  g.d_b = kind == LossKind::poisson ? 0.0 : dT;
  if (kind == LossKind::pg_regularized) {
    const double sigma = std::exp(0.5 * lv);
    g.loss += lambda_reg * sigma;
    g.d_lv += 0.5 * lambda_reg * sigma;
  }
  return g;
}

// Forward/backward scratch space, reused across pixels.
struct Workspace {
  std::vector<std::vector<double>> acts;  // post-tanh activations per layer
  std::vector<double> dh, dz, patch;

  void resize(const Layout& lay) {
    acts.assign(lay.sizes.size() - 1, {});
    for (size_t l = 0; l + 1 < lay.sizes.size(); ++l) acts[l].resize(lay.sizes[l + 1]);
    const int widest = *std::max_element(lay.sizes.begin(), lay.sizes.end());
    dh.resize(widest);
    dz.resize(widest);
    patch.resize(lay.sizes[0]);
  }
};

Prediction forward_cached(const BlindspotPredictor& m, const Layout& lay,
                          std::span<const double> patch, Workspace& ws) {
  const double* w = m.weights.data();
  std::span<const double> in = patch;
  for (size_t l = 0; l + 1 < lay.sizes.size(); ++l) {
    const int n_in = lay.sizes[l], n_out = lay.sizes[l + 1];
    const double* W = w + lay.w_off[l];
    const double* b = w + lay.b_off[l];
    auto& out = ws.acts[l];
    for (int o = 0; o < n_out; ++o) {
      double z = b[o];
      const double* row = W + static_cast<size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) z += row[i] * in[i];
      out[o] = std::tanh(z);
    }
    in = out;
  }
  const int last = lay.sizes.back();
  Prediction p;
  p.mu = w[lay.mu_b];
  p.log_var = w[lay.lv_b];
  const double* mw = w + lay.mu_w;
  const double* lw = w + lay.lv_w;
  for (int i = 0; i < last; ++i) {
    p.mu += mw[i] * in[i];
    p.log_var += lw[i] * in[i];
  }
  return p;
}

// Accumulates d(loss)/d(weights) into grad given head seeds d_mu, d_lv.
// forward_cached must have run for this patch.
void backward_into(const BlindspotPredictor& m, const Layout& lay,
                   std::span<const double> patch, double d_mu, double d_lv,
                   Workspace& ws, std::span<double> grad) {
  const double* w = m.weights.data();
  const int last = lay.sizes.back();
  const auto& h_last = ws.acts.back();

  for (int i = 0; i < last; ++i) {
    grad[lay.mu_w + i] += d_mu * h_last[i];
    grad[lay.lv_w + i] += d_lv * h_last[i];
    ws.dh[i] = d_mu * w[lay.mu_w + i] + d_lv * w[lay.lv_w + i];
  }
  grad[lay.mu_b] += d_mu;
  grad[lay.lv_b] += d_lv;

  for (size_t l = lay.sizes.size() - 1; l-- > 0;) {
    const int n_in = lay.sizes[l], n_out = lay.sizes[l + 1];
    const auto& h = ws.acts[l];
    std::span<const double> in =
        l == 0 ? patch : std::span<const double>(ws.acts[l - 1]);
    for (int o = 0; o < n_out; ++o) ws.dz[o] = ws.dh[o] * (1.0 - h[o] * h[o]);
    const double* W = w + lay.w_off[l];
    double* gW = grad.data() + lay.w_off[l];
    if (l > 0) std::fill(ws.dh.begin(), ws.dh.begin() + n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double d = ws.dz[o];
      const double* row = W + static_cast<size_t>(o) * n_in;
      double* grow = gW + static_cast<size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) grow[i] += d * in[i];
      if (l > 0)
        for (int i = 0; i < n_in; ++i) ws.dh[i] += row[i] * d;
      grad[lay.b_off[l] + o] += d;
    }
  }
}

bool uses_noise(LossKind kind) { return kind != LossKind::uncalibrated; }

std::string diag_dump(const BlindspotPredictor& m, int epoch, int step, double loss,
                      double lr) {
  double wnorm = 0;
  for (double v : m.weights) wnorm += v * v;
  std::ostringstream os;
  os << "epoch=" << epoch << " step=" << step << " loss=" << loss << " lr=" << lr
     << " weight_norm=" << std::sqrt(wnorm) << " a=" << m.noise.a << " b=" << m.noise.b;
  return os.str();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::ordered_json train_config_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["loss"] = to_string(c.loss_kind);
  j["lambda_reg"] = c.lambda_reg;
  j["learn_noise_params"] = c.learn_noise_params;
  j["noise_a"] = c.noise_init.a;
  j["noise_b"] = c.noise_init.b;
  j["lr"] = c.optimizer.lr;
  j["beta1"] = c.optimizer.beta1;
  j["beta2"] = c.optimizer.beta2;
  j["eps"] = c.optimizer.eps;
  j["epochs"] = c.epochs;
  j["batches_per_epoch"] = c.batches_per_epoch;
  j["batch_size"] = c.batch_size;
  j["crop_size"] = c.crop_size;
  j["lr_halving_patience"] = c.lr_halving_patience;
  j["seed"] = c.seed;
  j["patch_radius"] = c.patch_radius;
  j["hidden_sizes"] = c.hidden_sizes;
  return j;
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::uncalibrated: return "uncalibrated";
    case LossKind::pg_marginal: return "pg-marginal";
    case LossKind::gaussian: return "gaussian";
    case LossKind::poisson: return "poisson";
    case LossKind::pg_regularized: return "pg-regularized";
  }
  return "uncalibrated";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "uncalibrated") return LossKind::uncalibrated;
  if (s == "pg-marginal") return LossKind::pg_marginal;
  if (s == "gaussian") return LossKind::gaussian;
  if (s == "poisson") return LossKind::poisson;
  if (s == "pg-regularized") return LossKind::pg_regularized;
  throw ArgumentError("unknown loss kind '" + s + "'");
}

int BlindspotPredictor::param_count() const { return static_cast<int>(Layout(*this).total); }

Prediction forward(const BlindspotPredictor& model, std::span<const double> patch) {
  const Layout lay(model);
  if (patch.size() != static_cast<size_t>(lay.sizes[0]))
    throw ArgumentError("forward: patch size " + std::to_string(patch.size()) +
                        " != input dim " + std::to_string(lay.sizes[0]));
  if (model.weights.size() != lay.total)
    throw ArgumentError("forward: weight vector size mismatch");
  thread_local Workspace ws;
  ws.resize(lay);
  return forward_cached(model, lay, patch, ws);
}

void gather_patch(const Image& img, int x, int y, int patch_radius, std::span<double> out) {
  size_t k = 0;
  for (int dy = -patch_radius; dy <= patch_radius; ++dy) {
    const int sy = reflect_index(y + dy, img.height);
    for (int dx = -patch_radius; dx <= patch_radius; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int sx = reflect_index(x + dx, img.width);
      out[k++] = (sx == x && sy == y) ? 0.0 : img.at(sx, sy);
    }
  }
}

PriorPrediction predict_image(const BlindspotPredictor& model, const Image& y) {
  const Layout lay(model);
  if (model.weights.size() != lay.total)
    throw ArgumentError("predict_image: weight vector size mismatch");
  PriorPrediction pred;
  pred.mu = Image(y.width, y.height);
  pred.var = Image(y.width, y.height);
  pred.uncalibrated = model.trained_loss == LossKind::uncalibrated;
  thread_local Workspace ws;
  ws.resize(lay);
  for (int py = 0; py < y.height; ++py) {
    for (int px = 0; px < y.width; ++px) {
      gather_patch(y, px, py, model.patch_radius, ws.patch);
      const Prediction p = forward_cached(model, lay, ws.patch, ws);
      pred.mu.at(px, py) = static_cast<float>(p.mu);
      pred.var.at(px, py) = static_cast<float>(std::exp(p.log_var));
    }
  }
  return pred;
}

double loss_uncalibrated(double y, double mu, double log_var) {
  const double r = y - mu;
  return r * r * std::exp(-log_var) + log_var;
}

double loss_pg_marginal(double y, double mu, double log_var_prior, double a, double b) {
  const double total = a * mu + b + std::exp(log_var_prior);
  if (!(total > 0)) return kInf;
  const double r = y - mu;
  return r * r / total + std::log(total);
}

double loss_gaussian(double y, double mu, double log_var_prior, double noise_var) {
  const double total = noise_var + std::exp(log_var_prior);
  if (!(total > 0)) return kInf;
  const double r = y - mu;
  return r * r / total + std::log(total);
}

double loss_poisson(double y, double mu, double log_var_prior, double a) {
  const double total = a * mu + std::exp(log_var_prior);
  if (!(total > 0)) return kInf;
  const double r = y - mu;
  return r * r / total + std::log(total);
}

double loss_pg_regularizer(double log_var_prior, double lambda_reg) {
  return lambda_reg * std::exp(0.5 * log_var_prior);
}

std::vector<double> backward(const BlindspotPredictor& model,
                             const std::vector<TrainSample>& batch, LossKind kind,
                             double lambda_reg, bool learn_noise, double* mean_loss) {
  if (batch.empty()) throw ArgumentError("backward: empty batch");
  const Layout lay(model);
  const bool noise_grads = learn_noise && uses_noise(kind);
  std::vector<double> grad(lay.total + (noise_grads ? 2 : 0), 0.0);
  thread_local Workspace ws;
  ws.resize(lay);

  double loss_sum = 0.0;
  for (const auto& sample : batch) {
    if (sample.patch.size() != static_cast<size_t>(lay.sizes[0]))
      throw ArgumentError("backward: patch size mismatch");
    const Prediction p = forward_cached(model, lay, sample.patch, ws);
    const LossGrad lg =
        eval_loss(kind, sample.y, p.mu, p.log_var, model.noise.a, model.noise.b, lambda_reg);
    if (!std::isfinite(lg.loss)) {
      if (mean_loss) *mean_loss = lg.loss;
      return grad;
    }
    loss_sum += lg.loss;
    backward_into(model, lay, sample.patch, lg.d_mu, lg.d_lv, ws, grad);
    if (noise_grads) {
      grad[lay.total] += lg.d_a;
      grad[lay.total + 1] += lg.d_b;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  if (mean_loss) *mean_loss = loss_sum * inv;
  return grad;
}

double mean_image_loss(const BlindspotPredictor& model, const Image& y, LossKind kind,
                       double lambda_reg) {
  const Layout lay(model);
  thread_local Workspace ws;
  ws.resize(lay);
  double sum = 0.0;
  for (int py = 0; py < y.height; ++py) {
    for (int px = 0; px < y.width; ++px) {
      gather_patch(y, px, py, model.patch_radius, ws.patch);
      const Prediction p = forward_cached(model, lay, ws.patch, ws);
      const LossGrad lg =
          eval_loss(kind, y.at(px, py), p.mu, p.log_var, model.noise.a, model.noise.b, lambda_reg);
      sum += lg.loss;
    }
  }
  return sum / static_cast<double>(y.size());
}

std::string TrainLog::csv() const {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const auto& row : epochs) {
    out += std::to_string(row.epoch);
    out += ',';
    out += format_double(row.train_loss);
    out += ',';
    out += format_double(row.val_loss);
    out += ',';
    out += format_double(row.lr);
    out += '\n';
  }
  return out;
}

BlindspotPredictor init_predictor(const TrainConfig& config, Rng& rng) {
  if (config.patch_radius < 1) throw ArgumentError("patch_radius must be >= 1");
  if (config.hidden_sizes.empty()) throw ArgumentError("hidden_sizes must be non-empty");
  for (int h : config.hidden_sizes)
    if (h < 1) throw ArgumentError("hidden layer sizes must be >= 1");

  BlindspotPredictor model;
  model.patch_radius = config.patch_radius;
  model.hidden_sizes = config.hidden_sizes;
  model.trained_loss = config.loss_kind;
  model.noise = config.noise_init;
  const Layout lay(model);
  model.weights.assign(lay.total, 0.0);
  for (size_t l = 0; l + 1 < lay.sizes.size(); ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(lay.sizes[l]));
    const size_t count = static_cast<size_t>(lay.sizes[l + 1]) * lay.sizes[l];
    for (size_t i = 0; i < count; ++i) model.weights[lay.w_off[l] + i] = rng.uniform(-s, s);
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(lay.sizes.back()));
  for (int i = 0; i < lay.sizes.back(); ++i) {
    model.weights[lay.mu_w + i] = rng.uniform(-s, s);
    model.weights[lay.lv_w + i] = rng.uniform(-s, s);
  }
  return model;
}

BlindspotPredictor train(const std::vector<Image>& dataset, const TrainConfig& config,
                         Rng& rng, TrainLog* log) {
  if (dataset.empty()) throw ArgumentError("train: empty dataset");
  if (config.crop_size < 2 * config.patch_radius + 1)
    throw ArgumentError("train: crop_size must be >= 2*patch_radius + 1");
  if (config.epochs < 0 || config.batches_per_epoch < 1 || config.batch_size < 1)
    throw ArgumentError("train: bad epoch/batch configuration");
  if (config.optimizer.lr <= 0) throw ArgumentError("train: learning rate must be positive");
  if (config.lambda_reg < 0) throw ArgumentError("train: lambda_reg must be >= 0");
  if (config.lr_halving_patience < 1) throw ArgumentError("train: patience must be >= 1");

  Rng crop_rng = rng.split(streams::kCrop);
  Rng aug_rng = rng.split(streams::kAugment);
  Rng init_rng = rng.split(streams::kWeightInit);

  BlindspotPredictor model = init_predictor(config, init_rng);
  if (log) log->epochs.clear();
  if (config.epochs == 0) return model;

  // Validation split: last 10% of the dataset (at least one image); a
  // single-image dataset validates on itself.
  const size_t n = dataset.size();
  const size_t n_val = n >= 2 ? std::max<size_t>(1, n / 10) : 0;
  const size_t n_train = n - n_val;
  const auto val_begin = dataset.begin() + static_cast<long>(n_train);

  const Layout lay(model);
  const bool noise_grads = config.learn_noise_params && uses_noise(config.loss_kind);
  const size_t n_params = lay.total + (noise_grads ? 2 : 0);
  std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
  thread_local Workspace ws;
  ws.resize(lay);

  double lr = config.optimizer.lr;
  const double beta1 = config.optimizer.beta1, beta2 = config.optimizer.beta2;
  const double eps = config.optimizer.eps;
  double best_val = kInf;
  int plateau = 0;
  long t = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < config.batches_per_epoch; ++step) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      long samples = 0;
      for (int c = 0; c < config.batch_size; ++c) {
        const size_t idx = crop_rng.below(n_train);
        Image crop = random_crop(dataset[idx], config.crop_size, crop_rng);
        crop = augment(crop, random_augment_op(aug_rng));
        for (int py = 0; py < crop.height; ++py) {
          for (int px = 0; px < crop.width; ++px) {
            gather_patch(crop, px, py, model.patch_radius, ws.patch);
            const Prediction p = forward_cached(model, lay, ws.patch, ws);
            const LossGrad lg = eval_loss(config.loss_kind, crop.at(px, py), p.mu, p.log_var,
                                          model.noise.a, model.noise.b, config.lambda_reg);
            if (!std::isfinite(lg.loss))
              throw TrainDivergedError("training loss became non-finite",
                                       diag_dump(model, epoch, step + 1, lg.loss, lr));
            batch_loss += lg.loss;
            ++samples;
            backward_into(model, lay, ws.patch, lg.d_mu, lg.d_lv, ws, grad);
            if (noise_grads) {
              grad[lay.total] += lg.d_a;
              grad[lay.total + 1] += lg.d_b;
            }
          }
        }
      }
      batch_loss /= static_cast<double>(samples);
      const double inv = 1.0 / static_cast<double>(samples);

      ++t;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      auto adam_step = [&](size_t i, double& param) {
        const double g = grad[i] * inv;
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
        param -= lr * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + eps);
      };
      for (size_t i = 0; i < lay.total; ++i) adam_step(i, model.weights[i]);
      if (noise_grads) {
        adam_step(lay.total, model.noise.a);
        adam_step(lay.total + 1, model.noise.b);
      }
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(config.batches_per_epoch);

    double val_loss = 0.0;
    if (n_val > 0) {
      for (auto it = val_begin; it != dataset.end(); ++it)
        val_loss += mean_image_loss(model, *it, config.loss_kind, config.lambda_reg);
      val_loss /= static_cast<double>(n_val);
    } else {
      val_loss = mean_image_loss(model, dataset[0], config.loss_kind, config.lambda_reg);
    }
    if (!std::isfinite(val_loss))
      throw TrainDivergedError("validation loss became non-finite",
                               diag_dump(model, epoch, 0, val_loss, lr));

    if (log) log->epochs.push_back({epoch, epoch_loss, val_loss, lr});
    if (val_loss < best_val) {
      best_val = val_loss;
      plateau = 0;
    } else if (++plateau >= config.lr_halving_patience) {
      lr *= 0.5;
      plateau = 0;
    }
  }
  return model;
}

void save_checkpoint(const BlindspotPredictor& model, const std::string& path,
                     const TrainConfig* config) {
  nlohmann::ordered_json j;
  j["format"] = "pgdenoise-checkpoint";
  j["version"] = 1;
  j["patch_radius"] = model.patch_radius;
  j["hidden_sizes"] = model.hidden_sizes;
  j["loss_kind"] = to_string(model.trained_loss);
  j["noise_a"] = model.noise.a;
  j["noise_b"] = model.noise.b;
  if (config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(train_config_json(*config).dump())));
    j["config_hash"] = buf;
  } else {
    j["config_hash"] = "";
  }
  j["weights"] = model.weights;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open file for writing");
  out << j.dump(1, '\t') << '\n';
  if (!out) throw IoError(path, "write failed");
}

BlindspotPredictor load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint-not-found", path, "cannot open checkpoint");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint-parse", path, e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "pgdenoise-checkpoint")
      throw IoError("checkpoint-parse", path, "not a pgdenoise checkpoint");
    if (j.at("version").get<int>() != 1)
      throw IoError("checkpoint-parse", path, "unsupported checkpoint version");
    BlindspotPredictor model;
    model.patch_radius = j.at("patch_radius").get<int>();
    model.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
    model.trained_loss = loss_kind_from_string(j.at("loss_kind").get<std::string>());
    model.noise.a = j.at("noise_a").get<double>();
    model.noise.b = j.at("noise_b").get<double>();
    model.weights = j.at("weights").get<std::vector<double>>();
    if (model.patch_radius < 1 || model.hidden_sizes.empty())
      throw IoError("checkpoint-parse", path, "invalid architecture");
    if (model.weights.size() != static_cast<size_t>(model.param_count()))
      throw IoError("checkpoint-parse", path, "weight count does not match architecture");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint-parse", path, e.what());
  }
}

}  // namespace pgd
