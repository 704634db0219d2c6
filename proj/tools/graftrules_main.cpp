// Command-line front end. Everything model-related goes through the
// graftrules C API; this file only handles argument parsing, config
// plumbing, and artifact files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "graftrules.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void die(const std::string& context, gr_status st) {
  std::cerr << "error: " << context << ": " << gr_last_error()
            << " (status " << static_cast<int>(st) << ")\n";
  std::exit(st == GR_OK ? 1 : static_cast<int>(st));
}

void check(gr_status st, const std::string& context) {
  if (st != GR_OK) die(context, st);
}

std::string take_string(char* s) {
  std::string out = s ? s : "";
  gr_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(1);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(1);
  }
  out << text;
}

struct Session {
  json config = json::object();
  std::string config_path;
  fs::path out_dir = "out";
  std::optional<std::uint64_t> seed_override;

  void load(const std::string& cli_config, const std::string& cli_out,
            std::optional<std::uint64_t> cli_seed) {
    config_path = cli_config;
    if (config_path.empty()) {
      if (const char* env = std::getenv("GRAFTRULES_CONFIG")) config_path = env;
    }
    if (!config_path.empty()) {
      try {
        config = json::parse(read_file(config_path));
      } catch (const std::exception& e) {
        std::cerr << "error: config parse (" << config_path << "): " << e.what() << "\n";
        std::exit(1);
      }
    }
    if (!cli_out.empty())
      out_dir = cli_out;
    else if (config.contains("output_dir"))
      out_dir = config["output_dir"].get<std::string>();
    seed_override = cli_seed;
    fs::create_directories(out_dir);
  }

  json section(const char* name) const {
    json s = config.value(name, json::object());
    if (seed_override) s["seed"] = *seed_override;
    return s;
  }

  std::string data_csv() const {
    return config.value("data", json::object()).value("csv", "");
  }
  std::string schema_path() const {
    return config.value("data", json::object()).value("schema", "");
  }
  long sample() const {
    return config.value("data", json::object()).value("sample", 0L);
  }
  std::uint64_t data_seed() const {
    const auto d = config.value("data", json::object());
    return seed_override ? *seed_override : d.value("seed", std::uint64_t{0});
  }

  fs::path artifact(const char* name) const { return out_dir / name; }

  void snapshot() const {
    json snap = config;
    if (seed_override) snap["seed_override"] = *seed_override;
    write_file((out_dir / "run_config.json").string(), snap.dump(2) + "\n");
  }

  gr_dataset* open_dataset() const {
    const std::string csv = data_csv();
    const std::string schema = schema_path();
    if (csv.empty() || schema.empty()) {
      std::cerr << "error: config must set data.csv and data.schema\n";
      std::exit(1);
    }
    gr_dataset* ds = nullptr;
    check(gr_dataset_load_csv(csv.c_str(), read_file(schema).c_str(), sample(),
                              data_seed(), &ds),
          "load dataset");
    return ds;
  }

  gr_binarizer* open_binarizer() const {
    gr_binarizer* b = nullptr;
    check(gr_binarizer_load(artifact("binarizer.json").string().c_str(), &b),
          "load binarizer");
    return b;
  }

  gr_model* open_model() const {
    gr_model* m = nullptr;
    check(gr_model_load(artifact("model.json").string().c_str(), &m), "load model");
    return m;
  }

  gr_rulebook* open_rulebook() const {
    gr_rulebook* rb = nullptr;
    check(gr_rulebook_load(artifact("rulebook.json").string().c_str(), &rb),
          "load rulebook");
    return rb;
  }
};

int cmd_binarize(const Session& s) {
  gr_dataset* ds = s.open_dataset();
  gr_binarizer* b = nullptr;
  check(gr_binarizer_fit(ds, s.section("binning").dump().c_str(), &b), "fit binarizer");
  check(gr_binarizer_save(b, s.artifact("binarizer.json").string().c_str()),
        "save binarizer");
  std::cout << "binarizer: " << gr_binarizer_width(b) << " bits over "
            << gr_dataset_size(ds) << " rows -> " << s.artifact("binarizer.json").string()
            << "\n";
  gr_binarizer_free(b);
  gr_dataset_free(ds);
  s.snapshot();
  return 0;
}

int cmd_train(const Session& s) {
  gr_dataset* ds = s.open_dataset();
  gr_binarizer* b = nullptr;
  if (fs::exists(s.artifact("binarizer.json"))) {
    b = s.open_binarizer();
  } else {
    check(gr_binarizer_fit(ds, s.section("binning").dump().c_str(), &b), "fit binarizer");
    check(gr_binarizer_save(b, s.artifact("binarizer.json").string().c_str()),
          "save binarizer");
  }
  char* trace = nullptr;
  gr_model* m = nullptr;
  check(gr_model_train(ds, b, s.section("train").dump().c_str(), &trace, &m), "train");
  write_file(s.artifact("trace.csv").string(), take_string(trace));
  check(gr_model_save(m, s.artifact("model.json").string().c_str()), "save model");
  std::cout << "model trained on " << gr_dataset_size(ds) << " rows -> "
            << s.artifact("model.json").string() << "\n";
  gr_model_free(m);
  gr_binarizer_free(b);
  gr_dataset_free(ds);
  s.snapshot();
  return 0;
}

int cmd_evaluate(const Session& s, int k_flag) {
  gr_dataset* ds = s.open_dataset();
  json cfg = s.section("eval");
  cfg["binning"] = s.section("binning");
  cfg["train"] = s.section("train");
  if (k_flag > 0) cfg["k"] = k_flag;
  char* table = nullptr;
  char* csv = nullptr;
  check(gr_cross_validate(ds, cfg.dump().c_str(), &table, &csv), "evaluate");
  const std::string table_text = take_string(table);
  write_file(s.artifact("metrics.txt").string(), table_text);
  write_file(s.artifact("metrics.csv").string(), take_string(csv));
  std::cout << table_text;
  gr_dataset_free(ds);
  s.snapshot();
  return 0;
}

int cmd_extract_rules(const Session& s) {
  gr_model* m = s.open_model();
  gr_binarizer* b = s.open_binarizer();
  gr_rulebook* rb = nullptr;
  check(gr_rulebook_extract(m, b, &rb), "extract rules");
  check(gr_rulebook_save(rb, s.artifact("rulebook.json").string().c_str()),
        "save rulebook");
  char* text = nullptr;
  check(gr_rulebook_text(rb, &text), "render rules");
  const std::string rendered = take_string(text);
  write_file(s.artifact("rules.txt").string(), rendered);
  char* jtext = nullptr;
  check(gr_rulebook_json(rb, &jtext), "render rules json");
  write_file(s.artifact("rules.json").string(), take_string(jtext));
  std::cout << rendered;
  gr_rulebook_free(rb);
  gr_binarizer_free(b);
  gr_model_free(m);
  s.snapshot();
  return 0;
}

int cmd_explain(const Session& s, long row, const std::string& record) {
  gr_model* m = s.open_model();
  gr_rulebook* rb = s.open_rulebook();
  char* report = nullptr;
  if (!record.empty()) {
    check(gr_explain_record(m, rb, record.c_str(), &report), "explain");
  } else {
    gr_dataset* ds = s.open_dataset();
    check(gr_explain_row(m, rb, ds, row, &report), "explain");
    gr_dataset_free(ds);
  }
  const std::string text = take_string(report);
  write_file(s.artifact("local_report.json").string(), text + "\n");
  std::cout << text << "\n";
  gr_rulebook_free(rb);
  gr_model_free(m);
  return 0;
}

int cmd_audit(const Session& s, long row, const std::string& record,
              const std::string& against) {
  gr_model* m = s.open_model();
  gr_rulebook* rb = s.open_rulebook();
  gr_dataset* ds = s.open_dataset();
  json cfg = s.section("audit");
  if (!against.empty()) cfg["against"] = against;
  char* report = nullptr;
  if (!record.empty())
    check(gr_audit_record(m, rb, ds, record.c_str(), cfg.dump().c_str(), &report),
          "audit");
  else
    check(gr_audit_row(m, rb, ds, row, cfg.dump().c_str(), &report), "audit");
  const std::string text = take_string(report);
  write_file(s.artifact("audit.json").string(), text + "\n");
  std::cout << text << "\n";
  gr_dataset_free(ds);
  gr_rulebook_free(rb);
  gr_model_free(m);
  return 0;
}

int cmd_synth(const Session& s, const std::string& rules, int rows, int features,
              double noise, std::uint64_t seed) {
  // Rule strings like "(f0&f2)|(f1&f3)" become planted conjunction lists.
  json planted = json::array();
  json conj = json::array();
  std::string num;
  auto flush_num = [&] {
    if (!num.empty()) {
      conj.push_back(std::stoi(num));
      num.clear();
    }
  };
  for (char c : rules) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      num += c;
    } else {
      flush_num();
      if (c == '|') {
        planted.push_back(conj);
        conj = json::array();
      }
    }
  }
  flush_num();
  if (!conj.empty()) planted.push_back(conj);

  const json spec = {{"n_rows", rows},
                     {"n_binary_features", features},
                     {"planted_rules", planted},
                     {"label_noise", noise},
                     {"seed", s.seed_override.value_or(seed)}};
  gr_dataset* ds = nullptr;
  check(gr_dataset_synthesize(spec.dump().c_str(), &ds), "synthesize");
  check(gr_dataset_write_csv(ds, s.artifact("synthetic.csv").string().c_str()),
        "write synthetic csv");
  char* schema = nullptr;
  check(gr_dataset_schema_json(ds, &schema), "schema");
  write_file(s.artifact("synthetic_schema.json").string(), take_string(schema) + "\n");
  std::cout << "synthetic dataset: " << gr_dataset_size(ds) << " rows -> "
            << s.artifact("synthetic.csv").string() << "\n";
  gr_dataset_free(ds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable conjunction-rule credit model (gradient grafting)"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON config file (env GRAFTRULES_CONFIG)");
  app.add_option("--out", out_dir, "output directory for artifacts");
  app.add_option("--seed", seed, "override every configured seed");

  auto* binarize = app.add_subcommand("binarize", "fit and save the binarizer");
  auto* train = app.add_subcommand("train", "train the grafted model");
  auto* evaluate = app.add_subcommand("evaluate", "k-fold cross validation vs CART");
  int k_flag = 0;
  evaluate->add_option("--k", k_flag, "number of folds");
  auto* extract = app.add_subcommand("extract-rules", "convert the model to rules");
  auto* explain = app.add_subcommand("explain", "local explanation for one applicant");
  long row = 0;
  std::string record;
  explain->add_option("--row", row, "dataset row index");
  explain->add_option("--record", record, "inline JSON record");
  auto* audit = app.add_subcommand("audit", "Anchor-style faithfulness audit");
  long audit_row = 0;
  std::string audit_record, against;
  audit->add_option("--row", audit_row, "dataset row index");
  audit->add_option("--record", audit_record, "inline JSON record");
  audit->add_option("--against", against, "'negative' (default) or 'all-active'");
  auto* synth = app.add_subcommand("synth", "generate a planted-rule dataset");
  std::string rules = "(f0&f2)";
  int rows_flag = 5000, features = 30;
  double noise = 0.0;
  std::uint64_t synth_seed = 0;
  synth->add_option("--rules", rules, "e.g. \"(f0&f2)|(f1&f3)\"");
  synth->add_option("--rows", rows_flag, "number of rows");
  synth->add_option("--features", features, "number of binary features");
  synth->add_option("--noise", noise, "label flip probability");
  synth->add_option("--synth-seed", synth_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  Session session;
  session.load(config_path, out_dir, seed);

  if (binarize->parsed()) return cmd_binarize(session);
  if (train->parsed()) return cmd_train(session);
  if (evaluate->parsed()) return cmd_evaluate(session, k_flag);
  if (extract->parsed()) return cmd_extract_rules(session);
  if (explain->parsed()) return cmd_explain(session, row, record);
  if (audit->parsed()) return cmd_audit(session, audit_row, audit_record, against);
  if (synth->parsed()) return cmd_synth(session, rules, rows_flag, features, noise, synth_seed);
  return 1;
}
