#pragma once

// File formats:
//   * feature CSV:  header `label,a0,...,a{C-1},b0,...,b{C-1}`, one sample
//     per line, LF endings, values written with 9 significant digits;
//   * model file:   JSON document holding the fusion kind, frozen sketch
//     parameters and the softmax head.

#include <cbp/classifier.hpp>
#include <cbp/core.hpp>
#include <cbp/fusion.hpp>

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace cbp::io {

inline constexpr int kSignificantDigits = 9;
inline constexpr int kModelFormatVersion = 1;

/// Shortest round-trip text for `v` after rounding to 9 significant digits.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, kSignificantDigits);
  return std::string(buf, res.ptr);
}

inline double round_to_printed(double v) {
  const auto text = format_number(v);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInputError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw InvalidInputError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Feature CSV
// ---------------------------------------------------------------------------

inline std::string csv_header(std::size_t dim) {
  std::string h = "label";
  for (char view : {'a', 'b'}) {
    for (std::size_t i = 0; i < dim; ++i) {
      h += ',';
      h += view;
      h += std::to_string(i);
    }
  }
  return h;
}

inline std::string features_to_csv(const Dataset& data) {
  std::string out = csv_header(data.dim());
  out += '\n';
  for (const auto& s : data) {
    out += std::to_string(s.label);
    for (const auto* f : {&s.view_a, &s.view_b}) {
      for (double v : f->values()) {
        out += ',';
        out += format_number(v);
      }
    }
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

/// Parses the feature CSV. When `num_classes` is absent it is inferred as
/// max(label) + 1.
inline Dataset features_from_csv(std::string_view text,
                                 std::optional<std::size_t> num_classes = std::nullopt) {
  if (text.empty()) throw InvalidInputError("feature file is empty");

  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }

  const auto header = detail::split_commas(lines.front());
  if (header.size() < 3 || header.size() % 2 == 0 || header.front() != "label") {
    throw ParseError(1, "malformed header; expected label,a0,...,b0,...");
  }
  const std::size_t dim = (header.size() - 1) / 2;
  const std::string expected_header = csv_header(dim);
  const auto expected = detail::split_commas(expected_header);
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] != expected[k]) {
      throw ParseError(1, "malformed header field '" + std::string(header[k]) + "', expected '" +
                              std::string(expected[k]) + "'");
    }
  }
  if (lines.size() < 2) throw InvalidInputError("feature file has a header but no samples");

  struct Row {
    std::size_t label;
    std::vector<double> a, b;
  };
  std::vector<Row> rows;
  std::size_t max_label = 0;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    const auto fields = detail::split_commas(lines[n]);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    Row row{0, std::vector<double>(dim), std::vector<double>(dim)};
    {
      const auto f = fields[0];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), row.label);
      if (ec != std::errc{} || p != f.data() + f.size() || f.empty()) {
        throw ParseError(line_no, "label '" + std::string(f) + "' is not a nonnegative integer");
      }
    }
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto f = fields[k];
      double v = 0.0;
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || p != f.data() + f.size() || f.empty()) {
        throw ParseError(line_no, "field " + std::to_string(k) + " '" + std::string(f) +
                                      "' is not a number");
      }
      if (!std::isfinite(v)) throw ParseError(line_no, "non-finite value in field " + std::to_string(k));
      (k <= dim ? row.a[k - 1] : row.b[k - 1 - dim]) = v;
    }
    if (num_classes && row.label >= *num_classes) {
      throw ParseError(line_no, "label " + std::to_string(row.label) + " >= number of classes " +
                                    std::to_string(*num_classes));
    }
    max_label = std::max(max_label, row.label);
    rows.push_back(std::move(row));
  }

  Dataset data(dim, num_classes.value_or(max_label + 1));
  for (auto& r : rows) {
    data.add({FeatureVector(std::move(r.a)), FeatureVector(std::move(r.b)), r.label});
  }
  return data;
}

inline Dataset load_features_csv(const std::string& path,
                                 std::optional<std::size_t> num_classes = std::nullopt) {
  return features_from_csv(read_file(path), num_classes);
}

inline void save_features_csv(const Dataset& data, const std::string& path) {
  write_file(path, features_to_csv(data));
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

struct ModelSeeds {
  Seed root{0};
  Seed init{0};
  Seed shuffle{0};
};

/// A trained model: either a fused-feature head or a late-fusion pair.
struct Model {
  std::optional<fusion::FusionMethod> method;  // absent for late fusion
  std::vector<classifier::ClassifierParams> heads;  // one head, or two for late fusion
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  double alpha = 1.0;
  ModelSeeds seeds;

  bool is_late_fusion() const noexcept { return !method.has_value(); }
  std::string kind_token() const {
    return method ? std::string(fusion::to_token(method->kind())) : std::string("avg-late");
  }

  std::vector<double> predict_proba(const FeatureVector& fa, const FeatureVector& fb) const {
    const auto a = scale_features(fa, alpha);
    const auto b = scale_features(fb, alpha);
    if (is_late_fusion()) {
      return classifier::predict_late_avg(heads.at(0), heads.at(1), a.values(), b.values());
    }
    return classifier::predict_proba(heads.at(0), fusion::fuse(*method, a, b));
  }
};

namespace detail {

inline std::vector<double> rounded(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = round_to_printed(v[k]);
  return out;
}

inline nlohmann::json head_to_json(const classifier::ClassifierParams& p) {
  return {{"W", rounded(p.weights())}, {"b", rounded(p.bias())}};
}

inline classifier::ClassifierParams head_from_json(const nlohmann::json& j, std::size_t input_dim,
                                                   std::size_t num_classes) {
  return classifier::ClassifierParams(input_dim, num_classes, j.at("W").get<std::vector<double>>(),
                                      j.at("b").get<std::vector<double>>());
}

}  // namespace detail

inline std::string model_to_json(const Model& m) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["fusion"] = m.kind_token();
  j["C"] = m.input_dim;
  j["D"] = m.method ? m.method->output_dim() : m.input_dim;
  j["L"] = m.num_classes;
  j["alpha"] = m.alpha;
  j["seeds"] = {{"root", m.seeds.root.value}, {"init", m.seeds.init.value},
                {"shuffle", m.seeds.shuffle.value}};
  if (m.method && m.method->sketches()) {
    const auto& [pa, pb] = *m.method->sketches();
    j["sketch"] = {
        {"h_a", std::vector<std::uint32_t>(pa.h().begin(), pa.h().end())},
        {"s_a", std::vector<int>(pa.s().begin(), pa.s().end())},
        {"h_b", std::vector<std::uint32_t>(pb.h().begin(), pb.h().end())},
        {"s_b", std::vector<int>(pb.s().begin(), pb.s().end())},
    };
  }
  if (m.is_late_fusion()) {
    j["views"] = nlohmann::json::array({detail::head_to_json(m.heads.at(0)),
                                        detail::head_to_json(m.heads.at(1))});
  } else {
    const auto head = detail::head_to_json(m.heads.at(0));
    j["W"] = head["W"];
    j["b"] = head["b"];
  }
  return j.dump(1) + "\n";
}

inline Model model_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInputError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw InvalidInputError("unsupported model format_version");
    }
    Model m;
    m.input_dim = j.at("C").get<std::size_t>();
    m.num_classes = j.at("L").get<std::size_t>();
    m.alpha = j.at("alpha").get<double>();
    const auto& seeds = j.at("seeds");
    m.seeds = {Seed{seeds.at("root").get<std::uint64_t>()}, Seed{seeds.at("init").get<std::uint64_t>()},
               Seed{seeds.at("shuffle").get<std::uint64_t>()}};
    const auto token = j.at("fusion").get<std::string>();
    if (token == "avg-late") {
      const auto& views = j.at("views");
      if (views.size() != 2) throw InvalidInputError("late fusion model needs two view heads");
      for (const auto& v : views) m.heads.push_back(detail::head_from_json(v, m.input_dim, m.num_classes));
      return m;
    }
    const auto kind = fusion::kind_from_token(token);
    if (kind == fusion::FusionKind::kCompactBilinear) {
      const auto& s = j.at("sketch");
      const auto d = j.at("D").get<std::size_t>();
      m.method = fusion::FusionMethod::compact(
          sketch::CountSketchParams(s.at("h_a").get<std::vector<std::uint32_t>>(),
                                    s.at("s_a").get<std::vector<int>>(), d),
          sketch::CountSketchParams(s.at("h_b").get<std::vector<std::uint32_t>>(),
                                    s.at("s_b").get<std::vector<int>>(), d));
    } else {
      m.method.emplace(kind, m.input_dim);
    }
    m.heads.push_back(detail::head_from_json(j, m.method->output_dim(), m.num_classes));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const Model& m, const std::string& path) { write_file(path, model_to_json(m)); }
inline Model load_model(const std::string& path) { return model_from_json(read_file(path)); }

}  // namespace cbp::io
