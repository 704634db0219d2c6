#include "graft/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "graft/common.hpp"

namespace graft {

const char* category_name(Category c) {
  switch (c) {
    case Category::Loan: return "loan";
    case Category::History: return "history";
    case Category::Soft: return "soft";
  }
  return "?";
}

Category category_from_string(const std::string& s) {
  if (s == "loan") return Category::Loan;
  if (s == "history") return Category::History;
  if (s == "soft") return Category::Soft;
  throw std::invalid_argument("unknown category: " + s);
}

void FeatureSchema::validate() const {
  if (features.empty()) throw std::invalid_argument("schema has no features");
  if (label_column.empty()) throw std::invalid_argument("schema has no label column");
  std::unordered_set<std::string> seen;
  int per_cat[kNumCategories] = {0, 0, 0};
  for (const auto& f : features) {
    if (!seen.insert(f.name).second)
      throw std::invalid_argument("duplicate feature name: " + f.name);
    per_cat[static_cast<int>(f.category)]++;
  }
  for (int c = 0; c < kNumCategories; ++c) {
    if (per_cat[c] == 0)
      throw std::invalid_argument(std::string("no features in category '") +
                                  category_name(static_cast<Category>(c)) + "'");
  }
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    feats.push_back({{"name", f.name},
                     {"kind", f.kind == FeatureKind::Continuous ? "continuous" : "categorical"},
                     {"category", category_name(f.category)}});
  }
  return {{"label_column", label_column}, {"features", feats}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  FeatureSchema s;
  s.label_column = j.at("label_column").get<std::string>();
  for (const auto& jf : j.at("features")) {
    FeatureDef f;
    f.name = jf.at("name").get<std::string>();
    const std::string kind = jf.at("kind").get<std::string>();
    if (kind == "continuous")
      f.kind = FeatureKind::Continuous;
    else if (kind == "categorical")
      f.kind = FeatureKind::Categorical;
    else
      throw std::invalid_argument("unknown feature kind: " + kind);
    f.category = category_from_string(jf.at("category").get<std::string>());
    s.features.push_back(std::move(f));
  }
  s.validate();
  return s;
}

namespace {

// Minimal RFC-4180 reader: quoted fields, embedded commas/quotes/newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_data = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        row_has_data = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_data = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_data || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          records.push_back(std::move(row));
          row.clear();
          row_has_data = false;
        }
        break;
      default:
        field += ch;
        row_has_data = true;
        break;
    }
  }
  if (row_has_data || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  return records;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// -1 = drop row (Current or anything else), 0/1 = label
int encode_label(const std::string& raw) {
  const std::string v = lower(trim(raw));
  if (v == "fully paid") return 0;
  if (v == "charged off") return 1;
  return -1;
}

bool parse_number(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

LabeledDataset load_csv(const std::string& path, const FeatureSchema& schema,
                        LoadStats* stats) {
  schema.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  auto records = parse_csv(buf.str());
  if (records.empty()) throw std::runtime_error("empty CSV file: " + path);

  std::unordered_map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < records[0].size(); ++i) col_index[trim(records[0][i])] = i;

  std::vector<std::size_t> feat_cols;
  for (const auto& f : schema.features) {
    auto it = col_index.find(f.name);
    if (it == col_index.end())
      throw std::runtime_error("schema column missing from CSV header: " + f.name);
    feat_cols.push_back(it->second);
  }
  auto lbl_it = col_index.find(schema.label_column);
  if (lbl_it == col_index.end())
    throw std::runtime_error("label column missing from CSV header: " + schema.label_column);
  const std::size_t lbl_col = lbl_it->second;

  LabeledDataset ds;
  ds.schema = schema;
  LoadStats st;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    ++st.rows_read;
    if (rec.size() <= lbl_col) {
      ++st.dropped_invalid;
      continue;
    }
    const int label = encode_label(rec[lbl_col]);
    if (label < 0) {
      ++st.dropped_label;
      continue;
    }
    std::vector<Cell> row;
    row.reserve(schema.features.size());
    bool ok = true;
    for (std::size_t fi = 0; fi < schema.features.size(); ++fi) {
      if (rec.size() <= feat_cols[fi]) {
        ok = false;
        break;
      }
      const std::string& raw = rec[feat_cols[fi]];
      if (schema.features[fi].kind == FeatureKind::Continuous) {
        double v;
        if (!parse_number(raw, v)) {
          ok = false;
          break;
        }
        row.emplace_back(v);
      } else {
        const std::string t = trim(raw);
        if (t.empty()) {
          ok = false;
          break;
        }
        row.emplace_back(t);
      }
    }
    if (!ok) {
      ++st.dropped_invalid;
      continue;
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
    ++st.rows_kept;
  }
  if (stats) *stats = st;
  if (ds.rows.empty()) throw std::runtime_error("no usable rows in CSV file: " + path);
  return ds;
}

void write_csv(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path);
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    q += '"';
    return q;
  };
  for (const auto& f : ds.schema.features) out << quote(f.name) << ',';
  out << quote(ds.schema.label_column) << '\n';
  for (std::size_t r = 0; r < ds.rows.size(); ++r) {
    for (const auto& cell : ds.rows[r]) {
      if (std::holds_alternative<double>(cell))
        out << format_double(std::get<double>(cell));
      else
        out << quote(std::get<std::string>(cell));
      out << ',';
    }
    out << (ds.labels[r] == 1 ? "Charged Off" : "Fully Paid") << '\n';
  }
}

namespace {
LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  LabeledDataset out;
  out.schema = ds.schema;
  out.rows.reserve(idx.size());
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    out.rows.push_back(ds.rows[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}
}  // namespace

LabeledDataset sample_rows(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
  if (n >= ds.size()) return ds;
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return take_rows(ds, idx);
}

std::vector<std::pair<LabeledDataset, LabeledDataset>> kfold_split(
    const LabeledDataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  if (static_cast<std::size_t>(k) > ds.size())
    throw std::invalid_argument("kfold_split: k exceeds number of rows");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<std::pair<LabeledDataset, LabeledDataset>> folds;
  const std::size_t base = ds.size() / k;
  const std::size_t rem = ds.size() % k;
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t sz = base + (static_cast<std::size_t>(f) < rem ? 1 : 0);
    std::vector<std::size_t> test_idx(idx.begin() + pos, idx.begin() + pos + sz);
    std::vector<std::size_t> train_idx;
    train_idx.reserve(ds.size() - sz);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + pos);
    train_idx.insert(train_idx.end(), idx.begin() + pos + sz, idx.end());
    pos += sz;
    folds.emplace_back(take_rows(ds, train_idx), take_rows(ds, test_idx));
  }
  return folds;
}

void SyntheticSpec::validate() const {
  if (n_rows < 1) throw std::invalid_argument("synthetic: n_rows must be >= 1");
  if (n_binary_features < kNumCategories)
    throw std::invalid_argument("synthetic: need at least one feature per category");
  if (label_noise < 0.0 || label_noise >= 0.5)
    throw std::invalid_argument("synthetic: label_noise must be in [0, 0.5)");
  for (const auto& rule : planted_rules) {
    if (rule.features.empty())
      throw std::invalid_argument("synthetic: empty planted rule");
    for (int f : rule.features)
      if (f < 0 || f >= n_binary_features)
        throw std::invalid_argument("synthetic: planted rule references invalid feature");
  }
}

nlohmann::json SyntheticSpec::to_json() const {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : planted_rules) rules.push_back(r.features);
  return {{"n_rows", n_rows},
          {"n_binary_features", n_binary_features},
          {"planted_rules", rules},
          {"label_noise", label_noise},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_rows = j.at("n_rows").get<int>();
  s.n_binary_features = j.at("n_binary_features").get<int>();
  for (const auto& jr : j.at("planted_rules"))
    s.planted_rules.push_back({jr.get<std::vector<int>>()});
  s.label_noise = j.value("label_noise", 0.0);
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
  return s;
}

LabeledDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  LabeledDataset ds;
  const int n = spec.n_binary_features;
  // Features split into contiguous thirds so each subnet sees a block.
  const int per = n / kNumCategories;
  const int extra = n % kNumCategories;
  int fi = 0;
  for (int c = 0; c < kNumCategories; ++c) {
    const int count = per + (c < extra ? 1 : 0);
    for (int i = 0; i < count; ++i, ++fi) {
      ds.schema.features.push_back(
          {"f" + std::to_string(fi), FeatureKind::Categorical, static_cast<Category>(c)});
    }
  }
  ds.schema.label_column = "label";
  ds.schema.validate();

  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution bit(0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ds.rows.reserve(spec.n_rows);
  ds.labels.reserve(spec.n_rows);
  std::vector<int> bits(n);
  for (int r = 0; r < spec.n_rows; ++r) {
    std::vector<Cell> row;
    row.reserve(n);
    for (int i = 0; i < n; ++i) {
      bits[i] = bit(rng) ? 1 : 0;
      row.emplace_back(bits[i] ? std::string("1") : std::string("0"));
    }
    int label = 0;
    for (const auto& rule : spec.planted_rules) {
      bool hit = true;
      for (int f : rule.features) hit = hit && bits[f] == 1;
      if (hit) {
        label = 1;
        break;
      }
    }
    if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise) label = 1 - label;
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(label);
  }
  return ds;
}

std::vector<PlantedRule> parse_rule_expr(const std::string& expr) {
  std::vector<PlantedRule> rules;
  PlantedRule current;
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < expr.size() && std::isspace(static_cast<unsigned char>(expr[i]))) ++i;
  };
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("bad rule expression '" + expr + "': " + msg);
  };
  bool expect_literal = true;
  while (true) {
    skip_ws();
    if (i >= expr.size()) break;
    char c = expr[i];
    if (c == '(' || c == ')') {
      ++i;
      continue;
    }
    if (c == '&') {
      ++i;
      expect_literal = true;
      continue;
    }
    if (c == '|') {
      if (current.features.empty()) fail("empty conjunction before '|'");
      rules.push_back(std::move(current));
      current = {};
      ++i;
      expect_literal = true;
      continue;
    }
    if (c == 'f') {
      if (!expect_literal) fail("missing operator before literal");
      ++i;
      std::size_t start = i;
      while (i < expr.size() && std::isdigit(static_cast<unsigned char>(expr[i]))) ++i;
      if (i == start) fail("expected feature index after 'f'");
      current.features.push_back(std::stoi(expr.substr(start, i - start)));
      expect_literal = false;
      continue;
    }
    fail(std::string("unexpected character '") + c + "'");
  }
  if (!current.features.empty()) rules.push_back(std::move(current));
  if (rules.empty()) fail("no conjunctions found");
  return rules;
}

}  // namespace graft
