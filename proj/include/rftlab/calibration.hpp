#ifndef RFTLAB_CALIBRATION_HPP
#define RFTLAB_CALIBRATION_HPP

#include <string>
#include <vector>

#include "rftlab/errors.hpp"

namespace rftlab::calibration {

struct CalSample {
  std::string question_id;
  std::vector<std::string> answers;  // one per draw, canonical form
  std::string gold;
};

// Trims surrounding whitespace and lowercases; answers and gold are compared
// by exact equality of this form.
std::string canonical_answer(const std::string& raw);

struct Vote {
  std::string answer;
  double confidence = 0.0;  // modal count / number of answers
};

// Modal answer with ties broken toward the lexicographically smallest string.
// Throws EmptyInput for an empty answer list.
Vote majority_vote(const std::vector<std::string>& answers);

struct BinStat {
  double lower = 0.0;
  double upper = 0.0;
  std::int64_t count = 0;
  double mean_confidence = 0.0;
  double mean_accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<BinStat> bins;  // m_bins entries, empty bins report zeros
  double ece = 0.0;
  std::int64_t n_questions = 0;
};

// Majority-vote expected calibration error over equal-width bins
// ((m-1)/M, m/M], right-inclusive, with confidence 0 assigned to the first
// bin. Each question contributes a single (confidence, correct) record where
// correct means the majority answer equals the canonical gold.
CalibrationReport compute_ece(const std::vector<CalSample>& samples,
                              int m_bins = 10);

// CSV with header bin_lower,bin_upper,count,mean_confidence,mean_accuracy.
std::string reliability_csv(const CalibrationReport& report);

// One JSONL record per question: {"question_id":..., "answers":[...],
// "gold":...}. Parse errors throw IoError.
std::vector<CalSample> read_samples_jsonl(const std::string& text);
std::vector<CalSample> read_samples_jsonl_file(const std::string& path);

}  // namespace rftlab::calibration

#endif
