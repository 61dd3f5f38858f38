#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tfcca/density.hpp"
#include "tfcca/shape.hpp"

namespace tfcca::io {

using json = nlohmann::json;

enum class InputKind { kPdfCsv, kPdfSamples, kCurves };

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_invalid("unreadable_input", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw_invalid("unwritable_output", "cannot write " + tmp.string());
    out << content;
    if (!out) throw_invalid("unwritable_output", "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw_invalid("bad_number", "cannot parse '" + s + "' in " + where);
  return v;
}

/// Shortest decimal that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> nonempty_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    line = trim(line);
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

inline InputKind detect_input_kind(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return InputKind::kPdfCsv;
  const auto lines = nonempty_lines(read_text(path));
  if (lines.empty()) throw_invalid("empty_input", path.string() + " has no records");
  json first;
  try {
    first = json::parse(lines.front());
  } catch (const json::exception&) {
    throw_invalid("bad_json", "first record of " + path.string() + " is not JSON");
  }
  if (first.contains("samples")) return InputKind::kPdfSamples;
  if (first.contains("points")) return InputKind::kCurves;
  throw_invalid("unknown_format", path.string() + ": records need a 'samples' or 'points' field");
}

inline void require_unique(const std::vector<std::string>& ids, const std::string& source) {
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) throw_invalid("duplicate_id", "subject id '" + *dup + "' repeated in " + source);
}

struct PdfInput {
  std::vector<std::string> ids;
  std::vector<Pdf> pdfs;
  std::vector<std::pair<double, double>> rescale;  // per subject, sample input only
};

/// CSV: header "grid,id1,id2,..."; first column a uniform grid on [0,1].
inline PdfInput read_pdf_csv(const std::filesystem::path& path) {
  const auto lines = nonempty_lines(read_text(path));
  const std::string src = path.string();
  if (lines.size() < 4) throw_invalid("sample_size", src + " needs a header and at least 3 grid rows");
  const auto header = split_csv_line(lines[0]);
  if (header.size() < 2) throw_invalid("no_subjects", src + " has no subject columns");
  PdfInput out;
  out.ids.assign(header.begin() + 1, header.end());
  for (const auto& id : out.ids) {
    if (id.empty()) throw_invalid("empty_id", src + " has an empty subject id");
  }
  require_unique(out.ids, src);

  const int rows = static_cast<int>(lines.size()) - 1;
  const Eigen::Index cols = static_cast<Eigen::Index>(header.size());
  Eigen::MatrixXd values(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto cells = split_csv_line(lines[r + 1]);
    if (static_cast<Eigen::Index>(cells.size()) != cols) {
      throw_invalid("ragged_csv", src + " row " + std::to_string(r + 2) + " has " + std::to_string(cells.size()) +
                                      " cells, header has " + std::to_string(cols));
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      values(r, c) = parse_number(cells[c], src + " row " + std::to_string(r + 2));
    }
  }
  const Grid grid(rows);
  for (int r = 0; r < rows; ++r) {
    if (std::abs(values(r, 0) - grid.point(r)) > 1e-6) {
      throw_invalid("nonuniform_grid", src + ": grid column must be uniform on [0,1] (row " + std::to_string(r + 2) +
                                           " has " + format_number(values(r, 0)) + ")");
    }
  }
  for (Eigen::Index c = 1; c < cols; ++c) {
    out.pdfs.emplace_back(DiscreteFunction(grid, Eigen::MatrixXd(values.col(c))));
  }
  return out;
}

/// JSON lines {"id": ..., "samples": [...]}, turned into histogram densities.
inline PdfInput read_pdf_samples(const std::filesystem::path& path, const Grid& grid, int bins, double floor) {
  PdfInput out;
  const std::string src = path.string();
  int line_no = 0;
  for (const auto& line : nonempty_lines(read_text(path))) {
    ++line_no;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      throw_invalid("bad_json", src + " record " + std::to_string(line_no) + " is not JSON");
    }
    if (!rec.contains("id") || !rec.contains("samples") || !rec["samples"].is_array()) {
      throw_invalid("bad_record", src + " record " + std::to_string(line_no) + " needs 'id' and 'samples'");
    }
    const std::string id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    std::vector<double> samples;
    for (const auto& v : rec["samples"]) {
      if (!v.is_number()) throw_invalid("bad_number", src + " record " + std::to_string(line_no) + " has a non-number");
      samples.push_back(v.get<double>());
    }
    auto est = estimate_pdf(samples, bins, floor, grid);
    out.ids.push_back(id);
    out.pdfs.push_back(std::move(est.pdf));
    out.rescale.emplace_back(est.rescale_min, est.rescale_max);
  }
  require_unique(out.ids, src);
  return out;
}

/// Closed polygon resampled to `n` points equally spaced in arc length.
inline Curve resample_by_arc_length(std::vector<Eigen::Vector2d> pts, int n, const std::string& where) {
  if (pts.size() >= 2 && (pts.front() - pts.back()).norm() == 0.0) pts.pop_back();
  if (pts.size() < 3) throw_invalid("degenerate_curve", where + " needs at least 3 distinct points");
  const std::size_t m = pts.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) cum[k + 1] = cum[k] + (pts[(k + 1) % m] - pts[k]).norm();
  const double total = cum[m];
  if (!(total > 0.0)) throw_invalid("degenerate_curve", where + " has zero length");
  Eigen::MatrixXd v(n, 2);
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = total * k / (n - 1);
    while (seg + 1 < m && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double u = len > 0.0 ? std::clamp((s - cum[seg]) / len, 0.0, 1.0) : 0.0;
    v.row(k) = ((1.0 - u) * pts[seg] + u * pts[(seg + 1) % m]).transpose();
  }
  v.row(n - 1) = v.row(0);
  return Curve(DiscreteFunction(Grid(n), v, true));
}

struct CurveInput {
  std::vector<std::string> ids;
  std::vector<Curve> curves;
};

/// JSON lines {"id": ..., "points": [[x, y], ...]}.
inline CurveInput read_curves(const std::filesystem::path& path, int grid) {
  CurveInput out;
  const std::string src = path.string();
  int line_no = 0;
  for (const auto& line : nonempty_lines(read_text(path))) {
    ++line_no;
    const std::string where = src + " record " + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception&) {
      throw_invalid("bad_json", where + " is not JSON");
    }
    if (!rec.contains("id") || !rec.contains("points") || !rec["points"].is_array()) {
      throw_invalid("bad_record", where + " needs 'id' and 'points'");
    }
    std::vector<Eigen::Vector2d> pts;
    for (const auto& p : rec["points"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
        throw_invalid("bad_point", where + ": points must be [x, y] pairs");
      }
      pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    out.ids.push_back(rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump());
    out.curves.push_back(resample_by_arc_length(std::move(pts), grid, where));
  }
  require_unique(out.ids, src);
  return out;
}

/// Index into `b` for each id of `a`; every id must appear in both.
inline std::vector<std::size_t> pair_by_id(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < b.size(); ++i) where[b[i]] = i;
  std::vector<std::size_t> perm;
  perm.reserve(a.size());
  for (const auto& id : a) {
    const auto it = where.find(id);
    if (it == where.end()) throw_invalid("unmatched_id", "subject '" + id + "' missing from the second input");
    perm.push_back(it->second);
  }
  if (a.size() != b.size()) {
    std::map<std::string, int> seen;
    for (const auto& id : a) seen[id] = 1;
    for (const auto& id : b) {
      if (!seen.count(id)) throw_invalid("unmatched_id", "subject '" + id + "' missing from the first input");
    }
  }
  return perm;
}

template <class T>
std::vector<T> permute(const std::vector<T>& v, const std::vector<std::size_t>& perm) {
  std::vector<T> out;
  out.reserve(perm.size());
  for (auto i : perm) out.push_back(v[i]);
  return out;
}

/// Response CSV "id,value"; header row required.
inline std::map<std::string, double> read_response(const std::filesystem::path& path) {
  const auto lines = nonempty_lines(read_text(path));
  const std::string src = path.string();
  if (lines.size() < 2) throw_invalid("empty_input", src + " has no responses");
  std::map<std::string, double> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != 2) throw_invalid("ragged_csv", src + " row " + std::to_string(r + 1) + " needs id,value");
    if (!out.emplace(cells[0], parse_number(cells[1], src)).second) {
      throw_invalid("duplicate_id", "subject id '" + cells[0] + "' repeated in " + src);
    }
  }
  return out;
}

inline std::string pdf_csv(const Grid& grid, const std::vector<std::string>& ids, const std::vector<Pdf>& pdfs) {
  std::string s = "grid";
  for (const auto& id : ids) s += "," + id;
  s += "\n";
  for (int k = 0; k < grid.size(); ++k) {
    s += format_number(grid.point(k));
    for (const auto& p : pdfs) s += "," + format_number(p.function().values()(k, 0));
    s += "\n";
  }
  return s;
}

inline std::string curves_jsonl(const std::vector<std::string>& ids, const std::vector<Curve>& curves) {
  std::string s;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& v = curves[i].beta.values();
    json pts = json::array();
    for (Eigen::Index k = 0; k + 1 < v.rows(); ++k) pts.push_back({v(k, 0), v(k, 1)});
    s += json{{"id", ids[i]}, {"points", pts}}.dump() + "\n";
  }
  return s;
}

}  // namespace tfcca::io
