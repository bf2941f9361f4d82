#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "echoface/model/evaluate.hpp"
#include "echoface/model/train.hpp"

namespace echoface::model {

enum class SchemeKind { kKFold, kLeaveOneParticipantOut };

struct CrossvalScheme {
  SchemeKind kind = SchemeKind::kKFold;
  std::size_t folds = 6;
  /// Shuffle session order before cutting k-fold blocks.
  bool shuffle = false;
  std::uint64_t seed = 1;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Whole sessions only. Throws ConfigError when the scheme cannot be met.
std::vector<Fold> make_folds(SessionList sessions, const CrossvalScheme& scheme);
/// Throws std::logic_error if any session id is on both sides of the fold.
void assert_split_hygiene(SessionList sessions, const Fold& fold);

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::string> test_ids;
  face::MetricReport report;
};

struct CrossvalReport {
  std::vector<FoldResult> folds;
  face::MetricReport mean;    // mean of the fold metrics
  face::MetricReport pooled;  // all test frames together
};

struct CrossvalOptions {
  /// When set, each test session's first `fine_tune_seconds` are used to
  /// fine-tune the fold model and only the remainder is scored.
  std::optional<TrainConfig> fine_tune;
  double fine_tune_seconds = 30.0;
};

using FoldTrainer = std::function<Model(SessionList train, std::size_t fold)>;

CrossvalReport crossval(SessionList sessions, const CrossvalScheme& scheme, const FoldTrainer& trainer,
                        const CrossvalOptions& options = {});

/// Ridge cross-validation that builds every fold's statistics as the total
/// minus the fold's own test sessions.
CrossvalReport crossval_ridge(SessionList sessions, const CrossvalScheme& scheme, const ModelConfig& cfg,
                              const CrossvalOptions& options = {});

/// Splits a session into the first `seconds` of frames and the remainder,
/// whose first window ends on the first frame after the head.
std::pair<SessionData, SessionData> split_head(const SessionData& s, double seconds);

void write_crossval_text(std::ostream& os, const CrossvalReport& r);
void write_crossval_csv(std::ostream& os, const CrossvalReport& r);

}  // namespace echoface::model
