#include "rftlab/calibration.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace rftlab::calibration {

std::string canonical_answer(const std::string& raw) {
  std::size_t begin = 0, end = raw.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(raw[begin])))
    ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(raw[end - 1])))
    --end;
  std::string out = raw.substr(begin, end - begin);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Vote majority_vote(const std::vector<std::string>& answers) {
  if (answers.empty()) throw EmptyInput("majority_vote: no answers");
  std::map<std::string, int> counts;
  for (const std::string& a : answers) ++counts[a];
  // Ordered map: the first key at the maximal count is the smallest string.
  const std::pair<const std::string, int>* best = nullptr;
  for (const auto& kv : counts)
    if (!best || kv.second > best->second) best = &kv;
  return {best->first,
          static_cast<double>(best->second) / static_cast<double>(answers.size())};
}

namespace {

// Right-inclusive bin index for confidence in [0,1]. The 1e-12 nudge keeps
// values that round a hair above an edge in that edge's bin; confidence 0
// lands in the first bin.
int bin_index(double confidence, int m_bins) {
  int idx =
      static_cast<int>(std::ceil(confidence * m_bins - 1e-12)) - 1;
  if (idx < 0) idx = 0;
  if (idx >= m_bins) idx = m_bins - 1;
  return idx;
}

}  // namespace

CalibrationReport compute_ece(const std::vector<CalSample>& samples,
                              int m_bins) {
  if (m_bins < 1) throw DomainError("compute_ece: m_bins must be >= 1");
  if (samples.empty()) throw EmptyInput("compute_ece: no samples");

  CalibrationReport report;
  report.n_questions = static_cast<std::int64_t>(samples.size());
  report.bins.assign(static_cast<std::size_t>(m_bins), BinStat{});
  for (int m = 0; m < m_bins; ++m) {
    report.bins[static_cast<std::size_t>(m)].lower =
        static_cast<double>(m) / m_bins;
    report.bins[static_cast<std::size_t>(m)].upper =
        static_cast<double>(m + 1) / m_bins;
  }

  std::vector<double> conf_sum(static_cast<std::size_t>(m_bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(m_bins), 0.0);
  for (const CalSample& s : samples) {
    std::vector<std::string> canon;
    canon.reserve(s.answers.size());
    for (const std::string& a : s.answers) canon.push_back(canonical_answer(a));
    Vote vote = majority_vote(canon);
    bool correct = vote.answer == canonical_answer(s.gold);
    std::size_t b = static_cast<std::size_t>(bin_index(vote.confidence, m_bins));
    report.bins[b].count += 1;
    conf_sum[b] += vote.confidence;
    acc_sum[b] += correct ? 1.0 : 0.0;
  }

  const double n = static_cast<double>(samples.size());
  double ece = 0.0;
  for (int m = 0; m < m_bins; ++m) {
    BinStat& bin = report.bins[static_cast<std::size_t>(m)];
    if (bin.count == 0) continue;
    bin.mean_confidence = conf_sum[static_cast<std::size_t>(m)] / bin.count;
    bin.mean_accuracy = acc_sum[static_cast<std::size_t>(m)] / bin.count;
    ece += (bin.count / n) * std::abs(bin.mean_accuracy - bin.mean_confidence);
  }
  report.ece = ece;
  return report;
}

std::string reliability_csv(const CalibrationReport& report) {
  std::string out = "bin_lower,bin_upper,count,mean_confidence,mean_accuracy\n";
  char buf[160];
  for (const BinStat& b : report.bins) {
    std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%lld,%.12g,%.12g\n", b.lower,
                  b.upper, static_cast<long long>(b.count), b.mean_confidence,
                  b.mean_accuracy);
    out += buf;
  }
  return out;
}

std::vector<CalSample> read_samples_jsonl(const std::string& text) {
  std::vector<CalSample> samples;
  std::istringstream in(text);
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("samples line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("question_id") || !j.contains("answers") ||
        !j.contains("gold"))
      throw IoError("samples line " + std::to_string(lineno) +
                    ": need question_id, answers, gold");
    CalSample s;
    s.question_id = j["question_id"].is_string()
                        ? j["question_id"].get<std::string>()
                        : j["question_id"].dump();
    if (!j["answers"].is_array())
      throw IoError("samples line " + std::to_string(lineno) +
                    ": answers must be an array");
    for (const auto& a : j["answers"])
      s.answers.push_back(a.is_string() ? a.get<std::string>() : a.dump());
    s.gold =
        j["gold"].is_string() ? j["gold"].get<std::string>() : j["gold"].dump();
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<CalSample> read_samples_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("samples: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return read_samples_jsonl(ss.str());
}

}  // namespace rftlab::calibration
