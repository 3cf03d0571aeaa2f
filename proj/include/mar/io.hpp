#ifndef MAR_IO_HPP
#define MAR_IO_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mar/error.hpp"
#include "mar/linalg.hpp"
#include "mar/nn.hpp"
#include "mar/rbm.hpp"

namespace mar::io {

struct DenseDataset {
  Matrix X;
  std::vector<int> labels;
  std::vector<std::string> feature_names;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

/// Shortest decimal form is not used on purpose: files carry a fixed 17
/// significant digits so that every value round-trips.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view s, std::size_t line, std::size_t column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw parse_error("column " + std::to_string(column) + ": invalid number '" + std::string(s) + "'", line);
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view s, std::size_t line, const std::string& what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw parse_error("invalid " + what + " '" + std::string(s) + "'", line);
  }
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace detail

/// CSV with header `label,f0,f1,...`; one row per item, integer label >= 0.
inline DenseDataset read_dense_csv(std::istream& in) {
  DenseDataset ds;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw parse_error("missing header", 1);
  ++lineno;
  const auto header = detail::split(detail::trim_cr(line), ',');
  if (header.size() < 2 || header[0] != "label") throw parse_error("header must be 'label,<feature>,...'", lineno);
  for (std::size_t i = 1; i < header.size(); ++i) ds.feature_names.emplace_back(header[i]);
  const std::size_t d = ds.feature_names.size();

  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = detail::trim_cr(line);
    if (row.empty()) continue;
    const auto fields = detail::split(row, ',');
    if (fields.size() != d + 1) {
      throw parse_error("expected " + std::to_string(d + 1) + " fields, found " + std::to_string(fields.size()), lineno);
    }
    const int label = detail::parse_int<int>(fields[0], lineno, "label");
    if (label < 0) throw parse_error("label must be nonnegative", lineno);
    ds.labels.push_back(label);
    for (std::size_t j = 1; j <= d; ++j) values.push_back(detail::parse_double(fields[j], lineno, j + 1));
  }
  ds.X.resize(static_cast<Eigen::Index>(ds.labels.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < values.size(); ++i) ds.X.data()[i] = values[i];
  return ds;
}

inline DenseDataset load_dense_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_dense_csv(in);
}

inline void write_dense_csv(std::ostream& out, const DenseDataset& ds) {
  out << "label";
  for (Eigen::Index j = 0; j < ds.X.cols(); ++j) {
    out << ',' << (static_cast<std::size_t>(j) < ds.feature_names.size() ? ds.feature_names[static_cast<std::size_t>(j)]
                                                                          : "f" + std::to_string(j));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < ds.X.rows(); ++i) {
    out << ds.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) out << ',' << format_double(ds.X(i, j));
    out << '\n';
  }
}

inline void save_dense_csv(const std::string& path, const DenseDataset& ds) {
  auto out = detail::open_out(path);
  write_dense_csv(out, ds);
}

/// Lines `label<TAB>wordid:count[ wordid:count...]`; an empty label field
/// means unlabeled. With vocab = 0 the vocabulary is the largest id + 1.
inline rbm::DocBatch read_sparse_docs(std::istream& in, Eigen::Index vocab = 0) {
  rbm::DocBatch batch;
  std::string line;
  std::size_t lineno = 0;
  std::uint32_t max_id = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = detail::trim_cr(line);
    if (row.empty()) continue;
    const std::size_t tab = row.find('\t');
    if (tab == std::string_view::npos) throw parse_error("missing tab between label and counts", lineno);
    rbm::Document doc;
    const std::string_view label = row.substr(0, tab);
    if (!label.empty()) doc.label = detail::parse_int<int>(label, lineno, "label");
    const std::string_view body = row.substr(tab + 1);
    if (body.empty()) throw parse_error("document has no words", lineno);
    std::map<std::uint32_t, std::uint32_t> counts;
    for (std::string_view tok : detail::split(body, ' ')) {
      const std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos) throw parse_error("expected wordid:count, got '" + std::string(tok) + "'", lineno);
      const auto id = detail::parse_int<std::uint32_t>(tok.substr(0, colon), lineno, "word id");
      const auto c = detail::parse_int<std::uint32_t>(tok.substr(colon + 1), lineno, "count");
      if (c == 0) throw parse_error("count must be positive", lineno);
      if (vocab > 0 && static_cast<Eigen::Index>(id) >= vocab) {
        throw parse_error("word id " + std::to_string(id) + " out of range for vocabulary " + std::to_string(vocab), lineno);
      }
      if (!counts.emplace(id, c).second) throw parse_error("duplicate word id " + std::to_string(id), lineno);
      max_id = std::max(max_id, id);
    }
    doc.counts.assign(counts.begin(), counts.end());
    batch.docs.push_back(std::move(doc));
  }
  batch.vocab = vocab > 0 ? vocab : (batch.docs.empty() ? 0 : static_cast<Eigen::Index>(max_id) + 1);
  return batch;
}

inline rbm::DocBatch load_sparse_docs(const std::string& path, Eigen::Index vocab = 0) {
  auto in = detail::open_in(path);
  return read_sparse_docs(in, vocab);
}

inline void write_sparse_docs(std::ostream& out, const rbm::DocBatch& batch) {
  for (const auto& d : batch.docs) {
    if (d.label) out << *d.label;
    out << '\t';
    for (std::size_t i = 0; i < d.counts.size(); ++i) {
      if (i > 0) out << ' ';
      out << d.counts[i].first << ':' << d.counts[i].second;
    }
    out << '\n';
  }
}

inline void save_sparse_docs(const std::string& path, const rbm::DocBatch& batch) {
  auto out = detail::open_out(path);
  write_sparse_docs(out, batch);
}

/// Bare numeric CSV: one matrix row per line, no header.
inline Matrix read_matrix_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = detail::trim_cr(line);
    if (row.empty()) continue;
    const auto fields = detail::split(row, ',');
    if (rows == 0) cols = fields.size();
    if (fields.size() != cols) {
      throw parse_error("expected " + std::to_string(cols) + " fields, found " + std::to_string(fields.size()), lineno);
    }
    for (std::size_t j = 0; j < fields.size(); ++j) values.push_back(detail::parse_double(fields[j], lineno, j + 1));
    ++rows;
  }
  if (rows == 0) throw parse_error("empty matrix", lineno == 0 ? 1 : lineno);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < values.size(); ++i) m.data()[i] = values[i];
  return m;
}

inline Matrix load_matrix_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix_csv(in);
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j > 0 ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Model files: a JSON document
//   {"format": "mar-model", "version": 1, "kind": ..., "meta": {...},
//    "arrays": {name: {"rows": r, "cols": c, "data": [row-major values]}}}

struct ModelFile {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Matrix> arrays;

  const Matrix& array(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw error("model file has no array '" + name + "'");
    return it->second;
  }
  Vector vector(const std::string& name) const {
    const Matrix& m = array(name);
    if (m.cols() != 1) throw error("model array '" + name + "' is not a column vector");
    return m.col(0);
  }
};

inline void write_model(std::ostream& out, const ModelFile& mf) {
  out << "{\n  \"format\": \"mar-model\",\n  \"version\": 1,\n  \"kind\": " << nlohmann::json(mf.kind).dump()
      << ",\n  \"meta\": " << mf.meta.dump() << ",\n  \"arrays\": {";
  bool first = true;
  for (const auto& [name, m] : mf.arrays) {
    out << (first ? "\n" : ",\n") << "    " << nlohmann::json(name).dump() << ": {\"rows\": " << m.rows()
        << ", \"cols\": " << m.cols() << ", \"data\": [";
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (i > 0) out << ", ";
      out << format_double(m.data()[i]);
    }
    out << "]}";
    first = false;
  }
  out << "\n  }\n}\n";
}

inline ModelFile read_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw error(std::string("model file: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "mar-model") throw error("model file: not a mar-model document");
  ModelFile mf;
  mf.kind = j.value("kind", "");
  if (j.contains("meta")) mf.meta = j["meta"];
  if (!j.contains("arrays") || !j["arrays"].is_object()) throw error("model file: missing arrays");
  for (const auto& [name, a] : j["arrays"].items()) {
    const auto rows = a.at("rows").get<Eigen::Index>();
    const auto cols = a.at("cols").get<Eigen::Index>();
    const auto& data = a.at("data");
    if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
      throw error("model file: array '" + name + "' has inconsistent shape");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    mf.arrays.emplace(name, std::move(m));
  }
  return mf;
}

inline void save_model(const std::string& path, const ModelFile& mf) {
  auto out = detail::open_out(path);
  write_model(out, mf);
}

inline ModelFile load_model(const std::string& path) {
  auto in = detail::open_in(path);
  return read_model(in);
}

inline Matrix column(const Vector& v) { return Matrix(v); }

inline ModelFile to_model(const rbm::RsmParams& p) {
  ModelFile mf;
  mf.kind = "rbm";
  mf.arrays["W"] = p.W;
  mf.arrays["vis_bias"] = column(p.vis_bias);
  mf.arrays["hid_bias"] = column(p.hid_bias);
  return mf;
}

inline rbm::RsmParams rbm_from_model(const ModelFile& mf) {
  if (mf.kind != "rbm") throw error("model file: expected kind 'rbm', found '" + mf.kind + "'");
  rbm::RsmParams p;
  p.W = mf.array("W");
  p.vis_bias = mf.vector("vis_bias");
  p.hid_bias = mf.vector("hid_bias");
  p.validate();
  return p;
}

inline ModelFile to_model(const nn::MlpParams& p) {
  ModelFile mf;
  mf.kind = "nn";
  mf.arrays["hidden_W"] = p.hidden_W;
  mf.arrays["hidden_b"] = column(p.hidden_b);
  mf.arrays["out_W"] = p.out_W;
  mf.arrays["out_b"] = column(p.out_b);
  return mf;
}

inline nn::MlpParams nn_from_model(const ModelFile& mf) {
  if (mf.kind != "nn") throw error("model file: expected kind 'nn', found '" + mf.kind + "'");
  nn::MlpParams p;
  p.hidden_W = mf.array("hidden_W");
  p.hidden_b = mf.vector("hidden_b");
  p.out_W = mf.array("out_W");
  p.out_b = mf.vector("out_b");
  p.validate();
  return p;
}

inline ModelFile dml_model(const Matrix& a) {
  ModelFile mf;
  mf.kind = "dml";
  mf.arrays["A"] = a;
  return mf;
}

inline Matrix dml_from_model(const ModelFile& mf) {
  if (mf.kind != "dml") throw error("model file: expected kind 'dml', found '" + mf.kind + "'");
  return mf.array("A");
}

// ---------------------------------------------------------------------------
// Metrics reports.

struct MetricsReport {
  std::map<std::string, double> values;
  std::map<std::string, std::string> meta;
};

enum class Format { json, csv };

inline Format parse_format(const std::string& s) {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  throw invalid_argument("unknown format '" + s + "' (expected json or csv)");
}

/// JSON: {"meta": {...}, "metrics": {...}}; CSV: `key,value` lines with
/// meta keys prefixed by `meta.`.
inline void write_report(std::ostream& out, const MetricsReport& r, Format f) {
  if (f == Format::csv) {
    out << "key,value\n";
    for (const auto& [k, v] : r.meta) out << "meta." << k << ',' << v << '\n';
    for (const auto& [k, v] : r.values) out << k << ',' << format_double(v) << '\n';
    return;
  }
  out << "{\n  \"meta\": {";
  bool first = true;
  for (const auto& [k, v] : r.meta) {
    out << (first ? "" : ", ") << nlohmann::json(k).dump() << ": " << nlohmann::json(v).dump();
    first = false;
  }
  out << "},\n  \"metrics\": {";
  first = true;
  for (const auto& [k, v] : r.values) {
    out << (first ? "\n" : ",\n") << "    " << nlohmann::json(k).dump() << ": "
        << (std::isfinite(v) ? format_double(v) : std::string("null"));
    first = false;
  }
  out << "\n  }\n}\n";
}

}  // namespace mar::io

#endif  // MAR_IO_HPP
