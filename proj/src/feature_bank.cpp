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

#include "colearn/feature_bank.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "colearn/error.hpp"
#include "json.hpp"

namespace colearn {

namespace {

using nlohmann::json;

std::vector<std::string> default_class_names(const std::optional<LabelVector>& labels) {
  int max_label = -1;
  if (labels) {
    for (auto l : *labels) max_label = std::max<int>(max_label, l);
  }
  std::vector<std::string> names;
  for (int i = 0; i <= max_label; ++i) names.push_back(std::to_string(i));
  return names;
}

// Fills class_names/domain_name from the sidecar if present.
void read_sidecar(const std::filesystem::path& bank_path, FeatureBank& bank) {
  const auto meta = sidecar_path(bank_path);
  if (!std::filesystem::exists(meta)) {
    bank.class_names = default_class_names(bank.labels);
    return;
  }
  const auto bytes = detail::read_file(meta);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
    bank.class_names = doc.at("class_names").get<std::vector<std::string>>();
    bank.domain_name = doc.value("domain_name", std::string{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, "bad sidecar " + meta.string() + ": " + e.what());
  }
}

void write_sidecar(const FeatureBank& bank, const std::filesystem::path& bank_path) {
  json doc;
  doc["format"] = "fbank-meta";
  doc["version"] = kBankVersion;
  doc["class_names"] = bank.class_names;
  doc["domain_name"] = bank.domain_name;
  detail::write_text_file(sidecar_path(bank_path), doc.dump(2) + "\n");
}

bool has_csv_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv";
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& bank_path) {
  return std::filesystem::path(bank_path.string() + ".meta.json");
}

void FeatureBank::validate() const {
  if (features.rows() < 1 || features.cols() < 1) {
    throw Error(ErrorCode::EmptyBank, "feature bank must have N >= 1 and D >= 1");
  }
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      if (!std::isfinite(features(i, j))) {
        throw Error(ErrorCode::NonFiniteValue, "non-finite feature at row " + std::to_string(i) +
                                                   ", column " + std::to_string(j));
      }
    }
  }
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != features.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "label count does not match row count");
    }
    const int n_classes = num_classes();
    for (std::size_t i = 0; i < labels->size(); ++i) {
      const auto l = (*labels)[i];
      if (l != kUnlabeled && (l < 0 || l >= n_classes)) {
        throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(l) + " at row " +
                                                    std::to_string(i) + " outside [0, " +
                                                    std::to_string(n_classes) + ")");
      }
    }
  }
  std::set<std::string> seen;
  for (const auto& name : class_names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::DuplicateClassName, "duplicate class name '" + name + "'");
    }
  }
}

FeatureBank load_bank(const std::filesystem::path& path) {
  if (has_csv_extension(path)) return load_bank_csv(path);

  const auto bytes = detail::read_file(path);
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "file shorter than magic: " + path.string());
  if (!std::equal(kBankMagic, kBankMagic + 4, bytes.begin())) {
    throw Error(ErrorCode::BadMagic, "not an FBANK file: " + path.string());
  }
  detail::ByteReader in(bytes);
  char magic[4];
  in.get_bytes(magic, 4);

  std::uint32_t version = 0, n = 0, d = 0;
  std::uint8_t has_labels = 0;
  if (!in.get_u32(version)) throw Error(ErrorCode::Truncated, "header truncated");
  if (version != kBankVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "FBANK version " + std::to_string(version));
  }
  if (!in.get_u32(n) || !in.get_u32(d) || !in.get_u8(has_labels)) {
    throw Error(ErrorCode::Truncated, "header truncated");
  }
  if (has_labels > 1) throw Error(ErrorCode::MalformedFile, "has_labels flag must be 0 or 1");

  const std::uint64_t payload = std::uint64_t{n} * d * 4 + (has_labels ? std::uint64_t{n} * 4 : 0);
  if (in.remaining() < payload) {
    throw Error(ErrorCode::Truncated, "payload declares N=" + std::to_string(n) + ", D=" +
                                          std::to_string(d) + " but file is short");
  }
  if (in.remaining() > payload) throw Error(ErrorCode::TrailingData, "bytes after payload");

  FeatureBank bank;
  bank.features.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) in.get_f32(bank.features(i, j));
  }
  if (has_labels) {
    LabelVector labels(n);
    for (auto& l : labels) in.get_i32(l);
    bank.labels = std::move(labels);
  }
  read_sidecar(path, bank);
  bank.validate();
  return bank;
}

void save_bank(const FeatureBank& bank, const std::filesystem::path& path) {
  bank.validate();
  detail::ByteWriter out;
  out.put_bytes(kBankMagic, 4);
  out.put_u32(kBankVersion);
  out.put_u32(static_cast<std::uint32_t>(bank.num_samples()));
  out.put_u32(static_cast<std::uint32_t>(bank.dim()));
  out.put_u8(bank.labels ? 1 : 0);
  for (Eigen::Index i = 0; i < bank.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < bank.features.cols(); ++j) out.put_f32(bank.features(i, j));
  }
  if (bank.labels) {
    for (auto l : *bank.labels) out.put_i32(l);
  }
  detail::write_file(path, out.bytes());
  write_sidecar(bank, path);
}

FeatureBank load_bank_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::EmptyBank, "empty CSV: " + path.string());
  const auto header = split_commas(trim(line));
  int n_dims = 0;
  bool with_labels = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto col = trim(header[c]);
    if (col == "label" && c + 1 == header.size()) {
      with_labels = true;
    } else if (col == "d" + std::to_string(c)) {
      ++n_dims;
    } else {
      throw Error(ErrorCode::MalformedFile, "unexpected CSV column '" + std::string(col) + "'");
    }
  }

  std::vector<float> values;
  LabelVector labels;
  int n_rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(trim(line));
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": expected " +
                                                std::to_string(header.size()) + " cells");
    }
    for (int j = 0; j < n_dims; ++j) {
      const auto cell = trim(cells[j]);
      float v = 0.0f;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": bad number");
      }
      values.push_back(v);
    }
    if (with_labels) {
      const auto cell = trim(cells.back());
      std::int32_t l = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), l);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::MalformedFile, "line " + std::to_string(line_no) + ": bad label");
      }
      labels.push_back(l);
    }
    ++n_rows;
  }

  FeatureBank bank;
  bank.features = Eigen::Map<const FeatureMatrix>(values.data(), n_rows, n_dims);
  if (with_labels) bank.labels = std::move(labels);
  read_sidecar(path, bank);
  bank.validate();
  return bank;
}

void save_bank_csv(const FeatureBank& bank, const std::filesystem::path& path) {
  bank.validate();
  std::ostringstream out;
  for (int j = 0; j < bank.dim(); ++j) out << (j ? "," : "") << 'd' << j;
  if (bank.labels) out << ",label";
  out << '\n';
  char buf[64];
  for (int i = 0; i < bank.num_samples(); ++i) {
    for (int j = 0; j < bank.dim(); ++j) {
      // Shortest round-trip representation keeps the CSV path lossless.
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), bank.features(i, j));
      out << (j ? "," : "") << std::string_view(buf, ptr - buf);
    }
    if (bank.labels) out << ',' << (*bank.labels)[i];
    out << '\n';
  }
  detail::write_text_file(path, out.str());
  write_sidecar(bank, path);
}

Matrix l2_normalize_rows(const Matrix& features) {
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const double norm = features.row(i).norm();
    if (norm < kNormEpsilon) {
      out.row(i).setZero();
    } else {
      out.row(i) = features.row(i) / norm;
    }
  }
  return out;
}

}  // namespace colearn
