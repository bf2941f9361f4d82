#include "echoface/model/train.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace echoface::model {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
  if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0)) throw ConfigError("final_lr_fraction must be in [0,1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0,1)");
  if (active_repeat < 1) throw ConfigError("active_repeat must be >= 1");
  if (!(active_threshold >= 0.0)) throw ConfigError("active_threshold must be >= 0");
  if (window_stride < 1 || val_stride < 1) throw ConfigError("strides must be >= 1");
  if (max_vertical_shift < 0 || max_vertical_shift > kMaxVerticalShift) throw ConfigError("max_vertical_shift out of range");
  if (!(motion_scale >= 0.0)) throw ConfigError("motion_scale must be >= 0");
  if (!(target_scale > 0.0)) throw ConfigError("target_scale must be > 0");
}

namespace {

void require_sessions(SessionList sessions) {
  if (sessions.empty()) throw DataError("training needs at least one session");
  for (const SessionData* s : sessions) {
    s->validate();
    if (s->n_windows() == 0) throw DataError("session '" + s->session_id + "' has no windows");
    if (!(s->shape == sessions.front()->shape)) throw ShapeError("training sessions differ in window shape");
  }
}

struct WindowRef {
  std::uint32_t session;
  std::uint32_t window;
};

void copy_flat(const SessionData& s, std::size_t i, Eigen::Ref<Eigen::VectorXd> out) {
  const auto w = s.window(i);
  for (Eigen::Index c = 0; c < w.cols(); ++c) out.segment(c * w.rows(), w.rows()) = w.col(c);
}

}  // namespace

Eigen::RowVectorXd training_rest(SessionList sessions, std::span<const std::size_t> outputs) {
  Eigen::RowVectorXd rest = Eigen::RowVectorXd::Constant(static_cast<Eigen::Index>(outputs.size()),
                                                         std::numeric_limits<double>::infinity());
  for (const SessionData* s : sessions)
    for (std::size_t j = 0; j < outputs.size(); ++j)
      rest[static_cast<Eigen::Index>(j)] =
          std::min(rest[static_cast<Eigen::Index>(j)], s->gt.col(static_cast<Eigen::Index>(outputs[j])).minCoeff());
  return rest;
}

Model ridge_from_stats(const GramStats& g, const NormStats& norm, const Eigen::RowVectorXd& rest,
                       const fmcw::WindowShape& shape, const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.config = cfg;
  m.config.kind = ModelKind::kRidge;
  m.shape = shape;
  m.norm = norm;
  m.rest = cfg.target == TargetMode::kChange ? rest : Eigen::RowVectorXd::Zero(rest.size());
  m.offset = Eigen::RowVectorXd::Zero(rest.size());
  m.ridge = solve_ridge(g, norm, shape, cfg.ridge);
  return m;
}

GramStats training_gram(const SessionData& s, const ModelConfig& cfg) {
  GramStats g = session_gram(s, cfg.target, cfg.outputs);
  for (int k : cfg.ridge.shifts) g.add(session_gram(shift_session(s, k), cfg.target, cfg.outputs));
  return g;
}

Model train_ridge(SessionList sessions, const ModelConfig& cfg) {
  require_sessions(sessions);
  cfg.validate();
  GramStats total;
  for (const SessionData* s : sessions) total.add(training_gram(*s, cfg));
  return ridge_from_stats(total, compute_norm_stats(sessions), training_rest(sessions, cfg.outputs),
                          sessions.front()->shape, cfg);
}

double session_mae(const Model& m, const SessionData& s) {
  const Eigen::MatrixXd pred = m.predict_session(s);
  const Eigen::MatrixXd truth = window_targets(s, TargetMode::kAbsolute, m.config.outputs);
  return (pred - truth).cwiseAbs().mean();
}

namespace {

double validation_mae(const Model& m, SessionList validation, std::size_t stride) {
  if (validation.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  std::size_t count = 0;
  Eigen::MatrixXd flat(static_cast<Eigen::Index>(m.shape.size()), 1);
  for (const SessionData* s : validation) {
    if (stride == 1) {
      sum += session_mae(m, *s) * static_cast<double>(s->n_windows() * m.n_outputs());
      count += s->n_windows() * m.n_outputs();
      continue;
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s->n_windows(); i += stride) idx.push_back(i);
    flat.resize(flat.rows(), static_cast<Eigen::Index>(idx.size()));
    Eigen::MatrixXd truth(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(m.n_outputs()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      copy_flat(*s, idx[j], flat.col(static_cast<Eigen::Index>(j)));
      for (std::size_t o = 0; o < m.n_outputs(); ++o)
        truth(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(o)) =
            s->gt(static_cast<Eigen::Index>(s->frame_of(idx[j])), static_cast<Eigen::Index>(m.config.outputs[o]));
    }
    sum += (m.predict_flat(flat) - truth).cwiseAbs().sum();
    count += static_cast<std::size_t>(truth.size());
  }
  return sum / static_cast<double>(count);
}

// Shared loop for fresh training and conv fine-tuning.
std::vector<EpochRecord> run_adam(Model& m, SessionList sessions, const TrainConfig& tc, SessionList validation,
                                  const MotionBank* bank, const ProgressFn& progress) {
  tc.validate();
  if (tc.motion_scale > 0.0 && (!bank || bank->empty())) throw ConfigError("motion augmentation needs a motion bank");

  std::vector<Eigen::MatrixXd> targets;
  for (const SessionData* s : sessions) targets.push_back(window_targets(*s, m.config.target, m.config.outputs));
  std::vector<WindowRef> refs;
  for (std::size_t si = 0; si < sessions.size(); ++si)
    for (std::size_t i = 0; i < sessions[si]->n_windows(); i += tc.window_stride) {
      const auto row = targets[si].row(static_cast<Eigen::Index>(i));
      const bool active = (row - m.offset).cwiseAbs().maxCoeff() > tc.active_threshold;
      for (std::size_t r = 0; r < (active ? tc.active_repeat : 1); ++r)
        refs.push_back({static_cast<std::uint32_t>(si), static_cast<std::uint32_t>(i)});
    }

  const auto d = static_cast<Eigen::Index>(m.shape.size());
  const auto q = static_cast<Eigen::Index>(m.n_outputs());
  const auto frames = static_cast<Eigen::Index>(m.shape.n_frames);
  const auto rows = static_cast<Eigen::Index>(m.shape.rows());
  const Eigen::VectorXd mean = m.norm.mean.replicate(frames, 1);
  const Eigen::VectorXd inv = m.norm.scale.cwiseInverse().replicate(frames, 1);

  ParamVector& p = m.conv.params();
  ParamVector grad(p.size()), m1(p.size(), 0.0), m2(p.size(), 0.0);
  std::mt19937_64 rng(tc.seed);
  const std::size_t batches_per_epoch = (refs.size() + static_cast<std::size_t>(tc.batch_size) - 1) / tc.batch_size;
  const double total_steps = static_cast<double>(std::max<std::size_t>(1, batches_per_epoch * tc.epochs));
  std::size_t step = 0;

  std::vector<EpochRecord> curve;
  Eigen::MatrixXd x(d, tc.batch_size), t(q, tc.batch_size), dout;
  Eigen::MatrixXd plane(rows, frames);
  ConvNet::Cache cache;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    if (tc.shuffle)
      for (std::size_t i = refs.size(); i > 1; --i) std::swap(refs[i - 1], refs[rng() % i]);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b0 = 0; b0 < refs.size(); b0 += tc.batch_size) {
      const std::size_t nb = std::min<std::size_t>(tc.batch_size, refs.size() - b0);
      x.resize(d, static_cast<Eigen::Index>(nb));
      t.resize(q, static_cast<Eigen::Index>(nb));
      for (std::size_t j = 0; j < nb; ++j) {
        const WindowRef r = refs[b0 + j];
        const SessionData& s = *sessions[r.session];
        plane = s.window(r.window);
        if (tc.motion_scale > 0.0) bank->add_excerpt(plane, tc.motion_scale, rng);
        if (tc.max_vertical_shift > 0) {
          const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(2 * tc.max_vertical_shift + 1)) -
                        tc.max_vertical_shift;
          shift_rows(plane, m.shape, k);
        }
        x.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(plane.data(), d);
        t.col(static_cast<Eigen::Index>(j)) =
            ((targets[r.session].row(r.window) - m.offset) / m.target_scale).transpose();
      }
      x.colwise() -= mean;
      x.array().colwise() *= inv.array();

      const Eigen::MatrixXd out = m.conv.forward_train(x, cache);
      const double loss = l1_loss(out, t, &dout);
      if (!std::isfinite(loss) || !out.allFinite()) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(b0 / tc.batch_size) + " (loss " + std::to_string(loss) +
                               "); lower the learning rate or check the inputs for non-finite values");
      }
      loss_sum += loss * static_cast<double>(nb);
      loss_count += nb;

      std::fill(grad.begin(), grad.end(), 0.0);
      m.conv.backward(cache, dout, grad);
      ++step;
      const double progress_frac = static_cast<double>(step - 1) / total_steps;
      const double lr = tc.learning_rate *
                        (tc.final_lr_fraction + (1.0 - tc.final_lr_fraction) * 0.5 * (1.0 + std::cos(M_PI * progress_frac)));
      const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < p.size(); ++i) {
        m1[i] = tc.beta1 * m1[i] + (1.0 - tc.beta1) * grad[i];
        m2[i] = tc.beta2 * m2[i] + (1.0 - tc.beta2) * grad[i] * grad[i];
        p[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + tc.adam_eps);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.val_mae = validation_mae(m, validation, tc.val_stride);
    curve.push_back(rec);
    if (progress) progress(rec);
  }
  return curve;
}

}  // namespace

TrainResult train_conv(SessionList sessions, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       SessionList validation, const MotionBank* bank, const ProgressFn& progress) {
  require_sessions(sessions);
  model_cfg.validate();
  train_cfg.validate();
  TrainResult r;
  Model& m = r.model;
  m.config = model_cfg;
  m.config.kind = ModelKind::kConv;
  m.shape = sessions.front()->shape;
  m.norm = compute_norm_stats(sessions);
  m.rest = model_cfg.target == TargetMode::kChange ? training_rest(sessions, model_cfg.outputs)
                                                  : Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(model_cfg.outputs.size()));
  m.target_scale = train_cfg.target_scale;
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(model_cfg.outputs.size()));
  double n = 0.0;
  for (const SessionData* s : sessions) {
    const Eigen::MatrixXd y = window_targets(*s, model_cfg.target, model_cfg.outputs);
    sum += y.colwise().sum();
    n += static_cast<double>(y.rows());
  }
  m.offset = sum / n;
  m.conv = ConvNet(model_cfg.conv, m.shape, model_cfg.outputs.size(), train_cfg.seed);
  r.curve = run_adam(m, sessions, train_cfg, validation, bank, progress);
  return r;
}

TrainResult fine_tune(const Model& base, SessionList sessions, const TrainConfig& train_cfg, SessionList validation,
                      const MotionBank* bank) {
  require_sessions(sessions);
  if (!(sessions.front()->shape == base.shape)) throw ShapeError("fine-tuning sessions differ from the model's window shape");
  TrainResult r;
  r.model = base;
  if (base.config.kind == ModelKind::kConv) {
    r.curve = run_adam(r.model, sessions, train_cfg, validation, bank, {});
    return r;
  }
  train_cfg.validate();
  if (train_cfg.epochs == 0) return r;
  GramStats g;
  for (const SessionData* s : sessions) g.add(session_gram(*s, base.config.target, base.config.outputs));
  r.model.ridge = solve_ridge_toward(g, base.norm, base.shape, base.config.ridge, base.ridge);
  EpochRecord rec;
  rec.epoch = 1;
  rec.val_mae = validation_mae(r.model, validation, train_cfg.val_stride);
  r.curve.push_back(rec);
  return r;
}

void write_training_report(std::ostream& os, std::span<const EpochRecord> curve) {
  os << "epoch,loss,val_mae\n";
  for (const auto& e : curve) {
    os << e.epoch << ',' << e.loss << ',';
    if (std::isfinite(e.val_mae)) os << e.val_mae;
    os << '\n';
  }
}

}  // namespace echoface::model
