#include "echoface/model/crossval.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace echoface::model {

std::vector<Fold> make_folds(SessionList sessions, const CrossvalScheme& scheme) {
  const std::size_t n = sessions.size();
  if (n < 2) throw ConfigError("cross-validation needs at least two sessions");
  std::vector<Fold> folds;
  if (scheme.kind == SchemeKind::kKFold) {
    if (scheme.folds < 2 || scheme.folds > n)
      throw ConfigError(std::to_string(scheme.folds) + "-fold cross-validation is infeasible with " +
                        std::to_string(n) + " sessions");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (scheme.shuffle) {
      std::mt19937_64 rng(scheme.seed);
      for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    for (std::size_t f = 0; f < scheme.folds; ++f) {
      Fold fold;
      const std::size_t lo = f * n / scheme.folds, hi = (f + 1) * n / scheme.folds;
      for (std::size_t i = 0; i < n; ++i) (i >= lo && i < hi ? fold.test : fold.train).push_back(order[i]);
      folds.push_back(std::move(fold));
    }
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups[sessions[i]->participant].push_back(i);
    if (groups.size() < 2) throw ConfigError("leave-one-participant-out needs at least two participants");
    for (const auto& [who, members] : groups) {
      Fold fold;
      fold.test = members;
      for (std::size_t i = 0; i < n; ++i)
        if (sessions[i]->participant != who) fold.train.push_back(i);
      folds.push_back(std::move(fold));
    }
  }
  for (const auto& f : folds) assert_split_hygiene(sessions, f);
  return folds;
}

void assert_split_hygiene(SessionList sessions, const Fold& fold) {
  std::set<std::string> train;
  for (std::size_t i : fold.train) train.insert(sessions[i]->session_id);
  for (std::size_t i : fold.test)
    if (train.count(sessions[i]->session_id))
      throw std::logic_error("session '" + sessions[i]->session_id + "' appears in both train and test");
}

std::pair<SessionData, SessionData> split_head(const SessionData& s, double seconds) {
  const auto head = static_cast<std::size_t>(std::llround(seconds * s.frame_rate));
  const std::size_t w = s.shape.n_frames;
  if (head <= w || head + 1 > s.n_frames()) throw DataError("session '" + s.session_id + "' is too short to split");
  return {slice_frames(s, 0, head), slice_frames(s, head - w, s.n_frames() - (head - w))};
}

namespace {

std::vector<const SessionData*> pick(SessionList sessions, const std::vector<std::size_t>& idx) {
  std::vector<const SessionData*> out;
  for (std::size_t i : idx) out.push_back(sessions[i]);
  return out;
}

FoldResult score_fold(const Model& model, SessionList sessions, const Fold& fold, std::size_t f,
                      const CrossvalOptions& options) {
  FoldResult res;
  res.fold = f;
  std::vector<Eigen::MatrixXd> preds, gts;
  Eigen::Index rows = 0;
  for (std::size_t i : fold.test) {
    const SessionData& s = *sessions[i];
    res.test_ids.push_back(s.session_id);
    SessionPrediction p;
    if (options.fine_tune) {
      auto [head, tail] = split_head(s, options.fine_tune_seconds);
      const SessionData* h = &head;
      const Model tuned = fine_tune(model, std::span<const SessionData* const>(&h, 1), *options.fine_tune).model;
      p = predict_full(tuned, tail);
    } else {
      p = predict_full(model, s);
    }
    rows += p.pred.rows();
    preds.push_back(std::move(p.pred));
    gts.push_back(std::move(p.gt));
  }
  Eigen::MatrixXd pred(rows, static_cast<Eigen::Index>(face::kNumBlendshapes)), gt(pred.rows(), pred.cols());
  Eigen::Index r0 = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    pred.middleRows(r0, preds[k].rows()) = preds[k];
    gt.middleRows(r0, gts[k].rows()) = gts[k];
    r0 += preds[k].rows();
  }
  res.report = face::evaluate(pred, gt);
  return res;
}

void finish(CrossvalReport& r) {
  std::vector<face::MetricReport> reps;
  for (const auto& f : r.folds) reps.push_back(f.report);
  r.mean = mean_report(reps);
  r.pooled = face::combine(reps);
}

}  // namespace

CrossvalReport crossval(SessionList sessions, const CrossvalScheme& scheme, const FoldTrainer& trainer,
                        const CrossvalOptions& options) {
  const auto folds = make_folds(sessions, scheme);
  CrossvalReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = pick(sessions, folds[f].train);
    const Model model = trainer(train, f);
    report.folds.push_back(score_fold(model, sessions, folds[f], f, options));
  }
  finish(report);
  return report;
}

CrossvalReport crossval_ridge(SessionList sessions, const CrossvalScheme& scheme, const ModelConfig& cfg,
                              const CrossvalOptions& options) {
  cfg.validate();
  const auto folds = make_folds(sessions, scheme);
  const auto& shape = sessions.front()->shape;

  GramStats total;
  std::vector<RowMoments> moments;
  for (const SessionData* s : sessions) {
    if (!(s->shape == shape)) throw ShapeError("sessions differ in window shape");
    total.add(training_gram(*s, cfg));
    moments.push_back(session_moments(*s));
  }

  CrossvalReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    GramStats g = total;
    for (std::size_t i : folds[f].test) g.subtract(training_gram(*sessions[i], cfg));
    RowMoments m;
    for (std::size_t i : folds[f].train) m.add(moments[i]);
    const auto train = pick(sessions, folds[f].train);
    const Model model = ridge_from_stats(g, m.stats(), training_rest(train, cfg.outputs), shape, cfg);
    report.folds.push_back(score_fold(model, sessions, folds[f], f, options));
  }
  finish(report);
  return report;
}

void write_crossval_text(std::ostream& os, const CrossvalReport& r) {
  for (const auto& f : r.folds) {
    os << "fold " << f.fold << " test=";
    for (std::size_t i = 0; i < f.test_ids.size(); ++i) os << (i ? "," : "") << f.test_ids[i];
    os << "\n";
    face::write_report_text(os, f.report);
  }
  os << "mean over folds\n";
  face::write_report_text(os, r.mean);
}

void write_crossval_csv(std::ostream& os, const CrossvalReport& r) {
  write_report_csv_header(os);
  for (const auto& f : r.folds) write_report_csv_row(os, "fold" + std::to_string(f.fold), f.report);
  write_report_csv_row(os, "mean", r.mean);
  write_report_csv_row(os, "pooled", r.pooled);
}

}  // namespace echoface::model
