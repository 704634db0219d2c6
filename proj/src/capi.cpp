#include "graftrules.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "graft/audit.hpp"
#include "graft/binarizer.hpp"
#include "graft/conjnet.hpp"
#include "graft/dataset.hpp"
#include "graft/eval.hpp"
#include "graft/grafting.hpp"
#include "graft/rules.hpp"

using nlohmann::json;

struct gr_dataset {
  graft::LabeledDataset ds;
};
struct gr_binarizer {
  graft::Binarizer b;
};
struct gr_model {
  graft::GraftedModel m;
};
struct gr_rulebook {
  graft::RuleBook rb;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
gr_status wrap(Fn&& fn) {
  try {
    fn();
    return GR_OK;
  } catch (const std::invalid_argument& e) {
    g_last_error = e.what();
    return GR_ERR_ARGUMENT;
  } catch (const std::out_of_range& e) {
    g_last_error = e.what();
    return GR_ERR_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GR_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return GR_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return json::parse(in);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

graft::BinningConfig binning_from_json(const json& j) {
  graft::BinningConfig cfg;
  cfg.max_depth = j.value("max_depth", cfg.max_depth);
  cfg.min_leaf = j.value("min_leaf", cfg.min_leaf);
  return cfg;
}

graft::AnchorConfig anchor_from_json(const json& j) {
  graft::AnchorConfig cfg;
  cfg.tau = j.value("tau", cfg.tau);
  cfg.budget = j.value("budget", cfg.budget);
  cfg.samples = j.value("samples", cfg.samples);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.against_all_active = j.value("against", std::string("negative")) == "all-active";
  return cfg;
}

std::vector<graft::Cell> record_from_json(const graft::FeatureSchema& schema,
                                          const std::string& record_json) {
  const json j = json::parse(record_json);
  std::vector<graft::Cell> row;
  for (const auto& f : schema.features) {
    if (!j.contains(f.name))
      throw std::invalid_argument("record is missing feature: " + f.name);
    if (f.kind == graft::FeatureKind::Continuous) {
      if (!j[f.name].is_number())
        throw std::invalid_argument("feature " + f.name + " must be numeric");
      row.emplace_back(j[f.name].get<double>());
    } else {
      if (j[f.name].is_string())
        row.emplace_back(j[f.name].get<std::string>());
      else
        row.emplace_back(j[f.name].dump());
    }
  }
  return row;
}

std::string run_audit(const gr_model* m, const gr_rulebook* rb, const gr_dataset* ds,
                      const std::vector<graft::Cell>& row, const char* audit_cfg_json) {
  const graft::AnchorConfig cfg =
      anchor_from_json(audit_cfg_json ? json::parse(audit_cfg_json) : json::object());
  const graft::Binarizer& bin = rb->rb.binarizer();
  const graft::BinarizedData reference = graft::binarize_all(bin, ds->ds);
  const auto instance = bin.transform(row);

  const graft::GraftedModel& model = m->m;
  auto predict = [&model](std::span<const std::uint8_t> x) {
    return graft::forward_discrete(model, x).prob >= 0.5 ? 1 : 0;
  };
  const graft::Anchor anchor =
      graft::anchor_explain(predict, instance, bin, reference, cfg);
  const graft::LocalReport lr = graft::local_explanation(m->m, rb->rb, row);
  const graft::AuditVerdict verdict =
      graft::faithfulness_check(anchor, rb->rb, lr, cfg.against_all_active);
  return graft::audit_verdict_json(verdict, bin, cfg).dump(2);
}

}  // namespace

extern "C" {

const char* gr_last_error(void) { return g_last_error.c_str(); }

void gr_string_free(char* s) { delete[] s; }

gr_status gr_dataset_load_csv(const char* csv_path, const char* schema_json,
                              long sample, uint64_t seed, gr_dataset** out) {
  return wrap([&] {
    require(csv_path && schema_json && out, "null argument");
    const auto schema = graft::FeatureSchema::from_json(json::parse(schema_json));
    auto ds = graft::load_csv(csv_path, schema);
    if (sample > 0) ds = graft::sample_rows(ds, static_cast<std::size_t>(sample), seed);
    *out = new gr_dataset{std::move(ds)};
  });
}

gr_status gr_dataset_synthesize(const char* spec_json, gr_dataset** out) {
  return wrap([&] {
    require(spec_json && out, "null argument");
    const auto spec = graft::SyntheticSpec::from_json(json::parse(spec_json));
    *out = new gr_dataset{graft::generate_synthetic(spec)};
  });
}

gr_status gr_dataset_write_csv(const gr_dataset* ds, const char* path) {
  return wrap([&] {
    require(ds && path, "null argument");
    graft::write_csv(ds->ds, path);
  });
}

gr_status gr_dataset_schema_json(const gr_dataset* ds, char** out) {
  return wrap([&] {
    require(ds && out, "null argument");
    *out = dup_string(ds->ds.schema.to_json().dump(2));
  });
}

long gr_dataset_size(const gr_dataset* ds) {
  return ds ? static_cast<long>(ds->ds.size()) : -1;
}

void gr_dataset_free(gr_dataset* ds) { delete ds; }

gr_status gr_binarizer_fit(const gr_dataset* ds, const char* binning_cfg_json,
                           gr_binarizer** out) {
  return wrap([&] {
    require(ds && out, "null argument");
    const auto cfg =
        binning_from_json(binning_cfg_json ? json::parse(binning_cfg_json) : json::object());
    *out = new gr_binarizer{graft::Binarizer::fit(ds->ds, cfg)};
  });
}

gr_status gr_binarizer_save(const gr_binarizer* b, const char* path) {
  return wrap([&] {
    require(b && path, "null argument");
    write_text_file(path, b->b.to_json().dump(2));
  });
}

gr_status gr_binarizer_load(const char* path, gr_binarizer** out) {
  return wrap([&] {
    require(path && out, "null argument");
    *out = new gr_binarizer{graft::Binarizer::from_json(read_json_file(path))};
  });
}

int gr_binarizer_width(const gr_binarizer* b) { return b ? b->b.width() : -1; }

void gr_binarizer_free(gr_binarizer* b) { delete b; }

gr_status gr_model_train(const gr_dataset* ds, const gr_binarizer* b,
                         const char* train_cfg_json, char** trace_csv, gr_model** out) {
  return wrap([&] {
    require(ds && b && out, "null argument");
    const auto cfg = graft::TrainConfig::from_json(
        train_cfg_json ? json::parse(train_cfg_json) : json::object());
    const auto data = graft::binarize_all(b->b, ds->ds);
    graft::GraftedModel model = graft::init_model(b->b, cfg.hidden_per_subnet, cfg.seed);
    const auto result = graft::train_joint(model, data, cfg);
    if (trace_csv) *trace_csv = dup_string(graft::trace_to_csv(result));
    *out = new gr_model{std::move(model)};
  });
}

gr_status gr_model_save(const gr_model* m, const char* path) {
  return wrap([&] {
    require(m && path, "null argument");
    write_text_file(path, m->m.to_json().dump(2));
  });
}

gr_status gr_model_load(const char* path, gr_model** out) {
  return wrap([&] {
    require(path && out, "null argument");
    *out = new gr_model{graft::GraftedModel::from_json(read_json_file(path))};
  });
}

gr_status gr_model_predict(const gr_model* m, const gr_binarizer* b,
                           const gr_dataset* ds, long row, double* prob_out) {
  return wrap([&] {
    require(m && b && ds && prob_out, "null argument");
    require(row >= 0 && static_cast<std::size_t>(row) < ds->ds.size(),
            "row index out of range");
    if (m->m.layout_hash != b->b.layout_hash())
      throw std::runtime_error("model and binarizer layouts are incompatible");
    const auto x = b->b.transform(ds->ds.rows[static_cast<std::size_t>(row)]);
    *prob_out = graft::forward_discrete(m->m, x).prob;
  });
}

void gr_model_free(gr_model* m) { delete m; }

gr_status gr_cross_validate(const gr_dataset* ds, const char* cv_cfg_json,
                            char** table_text, char** csv_out) {
  return wrap([&] {
    require(ds, "null argument");
    const json j = cv_cfg_json ? json::parse(cv_cfg_json) : json::object();
    graft::CrossValConfig cfg;
    cfg.k = j.value("k", cfg.k);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("binning")) cfg.binning = binning_from_json(j["binning"]);
    if (j.contains("train")) cfg.train = graft::TrainConfig::from_json(j["train"]);
    cfg.cart_max_depth = j.value("cart_max_depth", cfg.cart_max_depth);
    cfg.cart_min_leaf = j.value("cart_min_leaf", cfg.cart_min_leaf);
    const auto result = graft::cross_validate(ds->ds, cfg);
    if (table_text) *table_text = dup_string(graft::metrics_table_text(result));
    if (csv_out) *csv_out = dup_string(graft::metrics_csv(result));
  });
}

gr_status gr_rulebook_extract(const gr_model* m, const gr_binarizer* b,
                              gr_rulebook** out) {
  return wrap([&] {
    require(m && b && out, "null argument");
    *out = new gr_rulebook{graft::extract_rules(m->m, b->b)};
  });
}

gr_status gr_rulebook_save(const gr_rulebook* rb, const char* path) {
  return wrap([&] {
    require(rb && path, "null argument");
    write_text_file(path, rb->rb.to_json().dump(2));
  });
}

gr_status gr_rulebook_load(const char* path, gr_rulebook** out) {
  return wrap([&] {
    require(path && out, "null argument");
    *out = new gr_rulebook{graft::RuleBook::from_json(read_json_file(path))};
  });
}

gr_status gr_rulebook_text(const gr_rulebook* rb, char** out) {
  return wrap([&] {
    require(rb && out, "null argument");
    *out = dup_string(graft::global_explanation_text(rb->rb));
  });
}

gr_status gr_rulebook_json(const gr_rulebook* rb, char** out) {
  return wrap([&] {
    require(rb && out, "null argument");
    *out = dup_string(graft::global_explanation_json(rb->rb).dump(2));
  });
}

void gr_rulebook_free(gr_rulebook* rb) { delete rb; }

gr_status gr_explain_row(const gr_model* m, const gr_rulebook* rb,
                         const gr_dataset* ds, long row, char** json_out) {
  return wrap([&] {
    require(m && rb && ds && json_out, "null argument");
    require(row >= 0 && static_cast<std::size_t>(row) < ds->ds.size(),
            "row index out of range");
    const auto lr =
        graft::local_explanation(m->m, rb->rb, ds->ds.rows[static_cast<std::size_t>(row)]);
    *json_out = dup_string(graft::local_report_json(rb->rb, lr).dump(2));
  });
}

gr_status gr_explain_record(const gr_model* m, const gr_rulebook* rb,
                            const char* record_json, char** json_out) {
  return wrap([&] {
    require(m && rb && record_json && json_out, "null argument");
    const auto row = record_from_json(rb->rb.binarizer().schema(), record_json);
    const auto lr = graft::local_explanation(m->m, rb->rb, row);
    *json_out = dup_string(graft::local_report_json(rb->rb, lr).dump(2));
  });
}

gr_status gr_audit_row(const gr_model* m, const gr_rulebook* rb, const gr_dataset* ds,
                       long row, const char* audit_cfg_json, char** json_out) {
  return wrap([&] {
    require(m && rb && ds && json_out, "null argument");
    require(row >= 0 && static_cast<std::size_t>(row) < ds->ds.size(),
            "row index out of range");
    *json_out = dup_string(
        run_audit(m, rb, ds, ds->ds.rows[static_cast<std::size_t>(row)], audit_cfg_json));
  });
}

gr_status gr_audit_record(const gr_model* m, const gr_rulebook* rb,
                          const gr_dataset* ds, const char* record_json,
                          const char* audit_cfg_json, char** json_out) {
  return wrap([&] {
    require(m && rb && ds && record_json && json_out, "null argument");
    const auto row = record_from_json(rb->rb.binarizer().schema(), record_json);
    *json_out = dup_string(run_audit(m, rb, ds, row, audit_cfg_json));
  });
}

}  // extern "C"
