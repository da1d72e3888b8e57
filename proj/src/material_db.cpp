#include "lhtes/material_db.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lhtes {

std::string_view to_string(MaterialKind kind) {
  return kind == MaterialKind::hcm ? "hcm" : "pcm";
}

MaterialKind parse_kind(std::string_view text) {
  if (text == "hcm" || text == "HCM") return MaterialKind::hcm;
  if (text == "pcm" || text == "PCM") return MaterialKind::pcm;
  throw std::invalid_argument("unknown material kind '" + std::string(text) +
                              "' (expected hcm or pcm)");
}

std::vector<std::string> attribute_names(MaterialKind kind) {
  if (kind == MaterialKind::hcm) return {"k", "c_p", "rho", "cost"};
  return {"k", "c_p", "rho", "L", "T_m"};
}

std::vector<double> MaterialRecord::attributes() const {
  if (kind == MaterialKind::hcm) return {k, c_p, rho, cost.value_or(0.0)};
  return {k, c_p, rho, latent.value_or(0.0), melt_temp.value_or(0.0)};
}

MaterialRecord MaterialRecord::from_attributes(std::string name,
                                               MaterialKind kind,
                                               std::span<const double> values) {
  if (values.size() != attribute_count(kind))
    throw std::invalid_argument("attribute vector has wrong length");
  MaterialRecord rec;
  rec.name = std::move(name);
  rec.kind = kind;
  rec.k = values[0];
  rec.c_p = values[1];
  rec.rho = values[2];
  if (kind == MaterialKind::hcm) {
    rec.cost = values[3];
  } else {
    rec.latent = values[3];
    rec.melt_temp = values[4];
  }
  return rec;
}

const MaterialRecord* MaterialDatabase::find(std::string_view name) const {
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const MaterialRecord& r) { return r.name == name; });
  return it == records.end() ? nullptr : &*it;
}

const MaterialRecord& MaterialDatabase::at(std::string_view name) const {
  if (const auto* rec = find(name)) return *rec;
  throw DatabaseError("unknown " + std::string(to_string(kind)) +
                      " material '" + std::string(name) +
                      "'; available: " + names_joined());
}

std::string MaterialDatabase::names_joined() const {
  std::string out;
  for (const auto& r : records) {
    if (!out.empty()) out += ", ";
    out += r.name;
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string header_for(MaterialKind kind) {
  return kind == MaterialKind::hcm ? "name,k,c_p,rho,cost"
                                   : "name,k,c_p,rho,L,T_m";
}

double parse_number(const std::string& field, std::size_t line_no,
                    const std::string& column) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(value))
    throw DatabaseError("line " + std::to_string(line_no) + ": column '" +
                        column + "' is not numeric: '" + field + "'");
  if (value <= 0.0)
    throw DatabaseError("line " + std::to_string(line_no) +
                        ": non-positive property '" + column + "'");
  return value;
}

}  // namespace

MaterialDatabase parse_database(std::string_view text, MaterialKind kind) {
  MaterialDatabase db;
  db.kind = kind;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::string> columns;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 &&
        static_cast<unsigned char>(line[0]) == 0xEF)
      line.erase(0, 3);  // UTF-8 BOM
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (!have_header) {
      std::string joined;
      for (std::size_t i = 0; i < fields.size(); ++i)
        joined += (i ? "," : "") + fields[i];
      if (joined != header_for(kind))
        throw DatabaseError("wrong column set for " +
                            std::string(to_string(kind)) + ": expected '" +
                            header_for(kind) + "', got '" + joined + "'");
      columns = fields;
      have_header = true;
      continue;
    }
    if (fields.size() != columns.size())
      throw DatabaseError("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(columns.size()) + " fields, got " +
                          std::to_string(fields.size()));
    if (fields[0].empty())
      throw DatabaseError("line " + std::to_string(line_no) + ": empty name");
    if (!seen.insert(fields[0]).second)
      throw DatabaseError("duplicate material name '" + fields[0] + "'");
    std::vector<double> values;
    for (std::size_t c = 1; c < fields.size(); ++c)
      values.push_back(parse_number(fields[c], line_no, columns[c]));
    db.records.push_back(MaterialRecord::from_attributes(fields[0], kind, values));
  }
  if (!have_header) throw DatabaseError("missing header line");
  return db;
}

MaterialDatabase load_database(const std::filesystem::path& path,
                               MaterialKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatabaseError("cannot open material database " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_database(ss.str(), kind);
}

NormalizedData normalize(std::span<const MaterialRecord> records) {
  if (records.size() < 2)
    throw DatabaseError("normalization needs at least two records");
  const MaterialKind kind = records.front().kind;
  const std::size_t n_attr = attribute_count(kind);
  const auto names = attribute_names(kind);
  Eigen::MatrixXd logs(records.size(), n_attr);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].kind != kind)
      throw DatabaseError("mixed material kinds in normalization input");
    auto attrs = records[i].attributes();
    for (std::size_t a = 0; a < n_attr; ++a) logs(i, a) = std::log(attrs[a]);
  }
  NormalizedData out;
  out.values.resize(records.size(), n_attr);
  out.params.attributes.resize(n_attr);
  for (std::size_t a = 0; a < n_attr; ++a) {
    const double lo = logs.col(a).minCoeff();
    const double hi = logs.col(a).maxCoeff();
    if (!(hi > lo))
      throw DatabaseError("attribute '" + names[a] +
                          "' is constant; cannot normalize");
    out.params.attributes[a] = {true, lo, hi};
    for (std::size_t i = 0; i < records.size(); ++i)
      out.values(i, a) = (logs(i, a) - lo) / (hi - lo);
    // exact endpoints despite rounding
    Eigen::Index imin = 0, imax = 0;
    logs.col(a).minCoeff(&imin);
    logs.col(a).maxCoeff(&imax);
    out.values(imin, a) = 0.0;
    out.values(imax, a) = 1.0;
  }
  return out;
}

std::vector<double> denormalize(std::span<const double> row,
                                const NormalizationParams& params) {
  if (row.size() != params.size())
    throw std::invalid_argument("denormalize: row length mismatch");
  std::vector<double> out(row.size());
  for (std::size_t a = 0; a < row.size(); ++a) {
    const auto& s = params.attributes[a];
    const double y = std::clamp(row[a], 0.0, 1.0);
    const double t = s.min + y * (s.max - s.min);
    out[a] = s.log_applied ? std::exp(t) : t;
  }
  return out;
}

std::vector<double> denormalize_derivative(std::span<const double> row,
                                           const NormalizationParams& params) {
  if (row.size() != params.size())
    throw std::invalid_argument("denormalize: row length mismatch");
  std::vector<double> out(row.size(), 0.0);
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (row[a] < 0.0 || row[a] > 1.0) continue;
    const auto& s = params.attributes[a];
    const double t = s.min + row[a] * (s.max - s.min);
    out[a] = (s.max - s.min) * (s.log_applied ? std::exp(t) : 1.0);
  }
  return out;
}

std::vector<double> normalize_row(std::span<const double> physical,
                                  const NormalizationParams& params) {
  if (physical.size() != params.size())
    throw std::invalid_argument("normalize_row: length mismatch");
  std::vector<double> out(physical.size());
  for (std::size_t a = 0; a < physical.size(); ++a) {
    const auto& s = params.attributes[a];
    const double t = s.log_applied ? std::log(physical[a]) : physical[a];
    out[a] = (t - s.min) / (s.max - s.min);
  }
  return out;
}

}  // namespace lhtes
