// Copyright 2026 The Colearn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "colearn/pseudolabeler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "colearn/error.hpp"

namespace colearn {

namespace {

constexpr std::array<std::string_view, 6> kSchemeNames = {
    "SelfConf", "OtherConf", "Match", "MatchOrConf", "MatchAndConf", "StrongGuidance"};
constexpr std::array<std::string_view, 3> kProvenanceNames = {"Match", "AdaptationBranch",
                                                              "PretrainedBranch"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

std::string format_confidence(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

PseudolabelSet build_pseudolabels(const ProbMatrix& p_a, const ProbMatrix& p_star, double gamma,
                                  SchemeKind scheme) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence threshold gamma must lie in (0, 1)");
  }
  if (p_a.rows() != p_star.rows() || p_a.cols() != p_star.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "branch probability matrices differ in shape");
  }

  PseudolabelSet out;
  for (int i = 0; i < p_a.rows(); ++i) {
    const int y_a = p_a.prediction(i);
    const int y_star = p_star.prediction(i);
    const double conf_a = p_a(i, y_a);
    const double conf_star = p_star(i, y_star);
    const bool match = y_a == y_star;
    const bool a_confident = conf_a > gamma;
    const bool star_confident = conf_star > gamma;

    const Pseudolabel from_a{i, y_a, conf_a, Provenance::AdaptationBranch};
    const Pseudolabel from_star{i, y_star, conf_star, Provenance::PretrainedBranch};
    const Pseudolabel agreed{i, y_a, conf_a, Provenance::Match};

    switch (scheme) {
      case SchemeKind::SelfConf:
        if (a_confident) out.entries.push_back(from_a);
        break;
      case SchemeKind::OtherConf:
      case SchemeKind::StrongGuidance:
        if (star_confident) out.entries.push_back(from_star);
        break;
      case SchemeKind::Match:
        if (match) out.entries.push_back(agreed);
        break;
      case SchemeKind::MatchAndConf:
        if (match && a_confident && star_confident) out.entries.push_back(agreed);
        break;
      case SchemeKind::MatchOrConf:
        if (match) {
          out.entries.push_back(agreed);
        } else if (a_confident && !star_confident) {
          out.entries.push_back(from_a);
        } else if (star_confident && !a_confident) {
          out.entries.push_back(from_star);
        }
        break;
    }
  }
  return out;
}

PseudolabelStats pseudolabel_stats(const PseudolabelSet& set, int n_total,
                                   const std::optional<LabelVector>& truth) {
  PseudolabelStats stats;
  stats.coverage = n_total > 0 ? static_cast<double>(set.size()) / n_total : 0.0;
  int checked = 0;
  int correct = 0;
  for (const auto& e : set.entries) {
    ++stats.provenance_counts[static_cast<int>(e.provenance)];
    if (truth && e.sample_index < static_cast<int>(truth->size())) {
      const auto t = (*truth)[e.sample_index];
      if (t == kUnlabeled) continue;
      ++checked;
      if (t == e.label) ++correct;
    }
  }
  if (truth && checked > 0) stats.accuracy = static_cast<double>(correct) / checked;
  return stats;
}

std::string_view to_string(SchemeKind scheme) { return kSchemeNames[static_cast<int>(scheme)]; }

std::string_view to_string(Provenance provenance) {
  return kProvenanceNames[static_cast<int>(provenance)];
}

std::optional<SchemeKind> parse_scheme(std::string_view text) {
  for (std::size_t i = 0; i < kSchemeNames.size(); ++i) {
    if (iequals(text, kSchemeNames[i])) return static_cast<SchemeKind>(i);
  }
  return std::nullopt;
}

std::optional<Provenance> parse_provenance(std::string_view text) {
  for (std::size_t i = 0; i < kProvenanceNames.size(); ++i) {
    if (iequals(text, kProvenanceNames[i])) return static_cast<Provenance>(i);
  }
  return std::nullopt;
}

std::string pseudolabels_to_csv(const PseudolabelSet& set) {
  std::ostringstream out;
  out << "sample_index,label,confidence,provenance\n";
  for (const auto& e : set.entries) {
    out << e.sample_index << ',' << e.label << ',' << format_confidence(e.confidence) << ','
        << to_string(e.provenance) << '\n';
  }
  return out.str();
}

void write_pseudolabels_csv(const PseudolabelSet& set, const std::filesystem::path& path) {
  detail::write_text_file(path, pseudolabels_to_csv(set));
}

PseudolabelSet read_pseudolabels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_index,label,confidence,provenance", 0) != 0) {
    throw Error(ErrorCode::MalformedFile, "missing pseudolabel CSV header");
  }
  PseudolabelSet set;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, label, conf, prov;
    if (!std::getline(row, idx, ',') || !std::getline(row, label, ',') ||
        !std::getline(row, conf, ',') || !std::getline(row, prov)) {
      throw Error(ErrorCode::MalformedFile, "bad pseudolabel row: " + line);
    }
    Pseudolabel e;
    auto parse_ok = [](const std::string& s, auto& v) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      return ec == std::errc{} && ptr == s.data() + s.size();
    };
    auto p = parse_provenance(prov);
    if (!parse_ok(idx, e.sample_index) || !parse_ok(label, e.label) ||
        !parse_ok(conf, e.confidence) || !p) {
      throw Error(ErrorCode::MalformedFile, "bad pseudolabel row: " + line);
    }
    e.provenance = *p;
    set.entries.push_back(e);
  }
  return set;
}

}  // namespace colearn
