#include "td/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace td {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write file: " + path);
  out << content;
}

void write_sidecar(const RunConfig& config, const std::string& path, json extra = {}) {
  json j;
  j["seed"] = config.seed;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  j["config_hash"] = hex;
  for (auto& [k, v] : extra.items()) j[k] = v;
  write_file(path + ".meta.json", j.dump(2) + "\n");
}

// Index-strided partition: output slot i is persona i regardless of the
// worker that produced it.
void parallel_for(int count, int workers, const std::function<void(int)>& body) {
  workers = std::max(1, workers);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> threads;
  std::atomic<int> next{0};
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  }
  for (auto& th : threads) th.join();
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

void RunConfig::check() const {
  if (persona_count < 1) throw ConfigurationError("persona_count must be >= 1");
  if (workers < 1) throw ConfigurationError("workers must be >= 1");
  if (engine != "llm" && engine != "classical" && engine != "both")
    throw ConfigurationError("engine must be llm, classical, or both");
  if (generation.max_retries < 0) throw ConfigurationError("max_retries must be >= 0");
  schema.check();
}

RunConfig run_config_from_json(const std::string& text) {
  json j = json::parse(text);
  RunConfig c;
  c.seed = j.value("seed", uint64_t{0});
  c.block_groups_path = j.value("block_groups", "");
  c.hts_path = j.value("hts", "");
  c.out_dir = j.value("out_dir", "out");
  c.persona_count = j.value("persona_count", 1);
  c.engine = j.value("engine", "both");
  c.workers = j.value("workers", 1);
  c.min_cohort_size = j.value("min_cohort_size", 10);
  c.score_distance_variant = j.value("score_variant", "divergence") == "distance";
  if (j.contains("schema")) {
    const auto& s = j.at("schema");
    if (s.contains("purposes")) c.schema.purposes = s.at("purposes").get<std::vector<std::string>>();
    if (s.contains("modes")) c.schema.modes = s.at("modes").get<std::vector<std::string>>();
  }
  if (j.contains("generation")) {
    const auto& g = j.at("generation");
    c.generation.model_name = g.value("model_name", c.generation.model_name);
    c.generation.endpoint_url = g.value("endpoint_url", c.generation.endpoint_url);
    c.generation.max_retries = g.value("max_retries", c.generation.max_retries);
    c.generation.request_timeout =
        std::chrono::milliseconds(g.value("request_timeout_ms", int64_t{60000}));
    auto params = [](const json& pj, DecodingParams fallback) {
      return DecodingParams{pj.value("temperature", fallback.temperature),
                            pj.value("top_p", fallback.top_p)};
    };
    if (g.contains("employed")) c.generation.employed_params = params(g.at("employed"), c.generation.employed_params);
    if (g.contains("unemployed")) c.generation.unemployed_params = params(g.at("unemployed"), c.generation.unemployed_params);
    c.mock_responses_path = g.value("mock_responses", "");
  }
  if (j.contains("classical")) {
    const auto& cl = j.at("classical");
    if (cl.contains("covariates")) c.covariates = cl.at("covariates").get<std::vector<std::string>>();
    c.models_path = cl.value("models", "");
  }
  if (j.contains("density_tiers")) {
    c.density_tiers.medium_min = j.at("density_tiers").value("medium_min", 50.0);
    c.density_tiers.high_min = j.at("density_tiers").value("high_min", 150.0);
  }
  c.check();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["block_groups"] = c.block_groups_path;
  j["hts"] = c.hts_path;
  j["out_dir"] = c.out_dir;
  j["persona_count"] = c.persona_count;
  j["engine"] = c.engine;
  j["workers"] = c.workers;
  j["min_cohort_size"] = c.min_cohort_size;
  j["score_variant"] = c.score_distance_variant ? "distance" : "divergence";
  j["schema"] = {{"purposes", c.schema.purposes}, {"modes", c.schema.modes}};
  j["generation"] = {
      {"model_name", c.generation.model_name},
      {"endpoint_url", c.generation.endpoint_url},
      {"max_retries", c.generation.max_retries},
      {"request_timeout_ms", static_cast<int64_t>(c.generation.request_timeout.count())},
      {"employed",
       {{"temperature", c.generation.employed_params.temperature},
        {"top_p", c.generation.employed_params.top_p}}},
      {"unemployed",
       {{"temperature", c.generation.unemployed_params.temperature},
        {"top_p", c.generation.unemployed_params.top_p}}},
      {"mock_responses", c.mock_responses_path}};
  j["classical"] = {{"covariates", c.covariates}, {"models", c.models_path}};
  j["density_tiers"] = {{"medium_min", c.density_tiers.medium_min},
                        {"high_min", c.density_tiers.high_min}};
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
  try {
    return run_config_from_json(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
}

uint64_t config_hash(const RunConfig& config) {
  // hash excludes worker count so output sidecars match across worker runs
  RunConfig canonical = config;
  canonical.workers = 1;
  return fnv1a(run_config_to_json(canonical));
}

std::vector<Persona> synthesize_personas(const std::map<std::string, BlockGroupProfile>& profiles,
                                         int count, uint64_t seed, const DensityTiers& tiers) {
  if (profiles.empty()) throw ConfigurationError("no block-group profiles loaded");
  std::vector<const BlockGroupProfile*> order;
  for (const auto& [geoid, p] : profiles) order.push_back(&p);
  std::vector<Persona> personas(count);
  for (int i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "P%06d", i);
    SeededSampler sampler(seed, static_cast<uint64_t>(i));
    personas[i] = synthesize_persona(*order[i % order.size()], id, tiers, sampler);
  }
  return personas;
}

GenerateOutcome generate_llm_batch(const std::vector<Persona>& personas,
                                   const std::map<std::string, BlockGroupProfile>& profiles,
                                   Backend& backend, const RunConfig& config) {
  std::vector<GenerationResult> results(personas.size(),
                                        GenerationFailure{"", {}});
  parallel_for(static_cast<int>(personas.size()), config.workers, [&](int i) {
    const Persona& p = personas[i];
    auto it = profiles.find(p.geoid);
    std::string context = it != profiles.end() ? land_use_context(it->second) : "";
    results[i] = generate_diary(p, context, backend, config.generation, config.schema);
  });
  GenerateOutcome out;
  for (auto& r : results) {
    if (auto* d = std::get_if<Diary>(&r))
      out.diaries.push_back(std::move(*d));
    else
      out.failures.push_back(std::move(std::get<GenerationFailure>(r)));
  }
  return out;
}

GenerateOutcome generate_classical_batch(const std::vector<Persona>& personas,
                                         const std::map<std::string, BlockGroupProfile>& profiles,
                                         const ClassicalModels& models,
                                         const RunConfig& config) {
  GenerateOutcome out;
  out.diaries.resize(personas.size());
  parallel_for(static_cast<int>(personas.size()), config.workers, [&](int i) {
    const Persona& p = personas[i];
    auto it = profiles.find(p.geoid);
    const BlockGroupProfile* profile = it != profiles.end() ? &it->second : nullptr;
    // classical streams are offset so llm/classical runs never share draws
    SeededSampler sampler(config.seed ^ 0x5eedc1a551ca1ULL, static_cast<uint64_t>(i));
    out.diaries[i] = generate_classical_diary(p, profile, models, sampler);
  });
  return out;
}

void run_synthesize(const RunConfig& config) {
  auto profiles = load_block_groups(config.block_groups_path);
  auto personas =
      synthesize_personas(profiles, config.persona_count, config.seed, config.density_tiers);
  fs::create_directories(config.out_dir);
  std::string path = config.out_dir + "/personas.jsonl";
  write_file(path, personas_to_jsonl(personas));
  write_sidecar(config, path, {{"persona_count", personas.size()}});
}

void run_generate(const RunConfig& config) {
  auto profiles = load_block_groups(config.block_groups_path);
  std::string personas_path = config.out_dir + "/personas.jsonl";
  auto personas = personas_from_jsonl_file(personas_path);
  fs::create_directories(config.out_dir);

  if (config.engine == "llm" || config.engine == "both") {
    std::unique_ptr<Backend> backend;
    if (!config.mock_responses_path.empty())
      backend = std::make_unique<MockBackend>(config.mock_responses_path);
    else
      backend = std::make_unique<HttpBackend>(config.generation);
    GenerateOutcome out = generate_llm_batch(personas, profiles, *backend, config);
    // failed personas still appear (zero-trip rows) so engine files share
    // one persona_id set
    std::vector<Diary> all;
    size_t di = 0;
    for (const auto& p : personas) {
      if (di < out.diaries.size() && out.diaries[di].persona_id == p.persona_id)
        all.push_back(out.diaries[di++]);
      else
        all.push_back(Diary{p.persona_id, {}, DiarySource::llm});
    }
    std::string path = config.out_dir + "/diaries_llm.csv";
    write_file(path, diaries_to_csv(all));
    write_sidecar(config, path,
                  {{"engine", "llm"},
                   {"failures", out.failures.size()},
                   {"max_retries", config.generation.max_retries}});
    if (!out.failures.empty()) {
      std::string flines;
      for (const auto& f : out.failures) {
        json j;
        j["persona_id"] = f.persona_id;
        json attempts = json::array();
        for (const auto& a : f.attempts)
          attempts.push_back({{"attempt", a.attempt}, {"error", a.error}});
        j["attempts"] = attempts;
        flines += j.dump() + "\n";
      }
      write_file(config.out_dir + "/failures_llm.jsonl", flines);
    }
  }

  if (config.engine == "classical" || config.engine == "both") {
    ClassicalModels models = [&]() {
      if (!config.models_path.empty() && fs::exists(config.models_path))
        return classical_models_from_json(read_file(config.models_path));
      auto persons = load_hts(config.hts_path);
      filter_hts_outliers(persons);
      ClassicalModels fitted = calibrate_classical(persons, profiles, config.covariates);
      std::string save_path = config.models_path.empty() ? config.out_dir + "/models.json"
                                                         : config.models_path;
      write_file(save_path, classical_models_to_json(fitted));
      return fitted;
    }();
    if (models.trip_count.status.outcome == FitOutcome::separation)
      throw DomainError("classical calibration failed: NB separation detected");
    GenerateOutcome out = generate_classical_batch(personas, profiles, models, config);
    std::string path = config.out_dir + "/diaries_classical.csv";
    write_file(path, diaries_to_csv(out.diaries));
    write_sidecar(config, path, {{"engine", "classical"}});
  }
}

namespace {

DiarySource source_for_file(const std::string& path) {
  std::ifstream meta(path + ".meta.json");
  if (meta) {
    try {
      json j;
      meta >> j;
      if (j.contains("engine")) return diary_source_from_string(j.at("engine").get<std::string>());
    } catch (...) {
    }
  }
  return path.find("classical") != std::string::npos ? DiarySource::classical
                                                     : DiarySource::llm;
}

}  // namespace

std::string run_validate(const RunConfig& config, const std::vector<std::string>& diary_files) {
  if (diary_files.empty()) throw ConfigurationError("validate: no diary files given");
  auto persons = load_hts(config.hts_path);
  int outliers_removed = filter_hts_outliers(persons);
  CohortIndex index(persons, config.schema);
  ScoreOptions opts{config.score_distance_variant};

  struct Scored {
    std::string persona_id;
    DiarySource source;
    RealismScore score;
  };
  std::vector<Scored> rows;
  json aggregate_json;
  std::map<std::string, std::vector<double>> overall_by_source;

  // persona attributes come from the synthesized persona file
  auto personas = personas_from_jsonl_file(config.out_dir + "/personas.jsonl");
  std::map<std::string, const Persona*> by_id;
  for (const auto& p : personas) by_id[p.persona_id] = &p;

  for (const auto& file : diary_files) {
    DiarySource source = source_for_file(file);
    auto diaries = diaries_from_csv(read_file(file), source);
    if (diaries.empty()) throw DomainError("validate: diary file is empty: " + file);
    for (const auto& d : diaries)
      if (!by_id.count(d.persona_id))
        throw LoadError("validate: diary persona " + d.persona_id +
                        " not found in personas.jsonl");

    std::vector<Scored> file_rows(diaries.size());
    parallel_for(static_cast<int>(diaries.size()), config.workers, [&](int i) {
      const Diary& d = diaries[i];
      CohortStats cohort = index.match_cohort(*by_id.at(d.persona_id), config.min_cohort_size);
      file_rows[i] = {d.persona_id, source, overall_realism(d, cohort, opts)};
    });
    for (auto& r : file_rows) {
      overall_by_source[to_string(r.source)].push_back(r.score.overall);
      rows.push_back(std::move(r));
    }
    AggregateScore agg = aggregate_scores(diaries, persons, config.schema, opts);
    aggregate_json[to_string(source)] = {{"trip_count_score_agg", agg.trip_count_score_agg},
                                         {"purpose_score_agg", agg.purpose_score_agg},
                                         {"interval_score_agg", agg.interval_score_agg},
                                         {"mode_score_agg", agg.mode_score_agg},
                                         {"overall_agg", agg.overall_agg}};
  }

  fs::create_directories(config.out_dir);
  std::string csv = "persona_id,source,cohort_level,cohort_size,trip_count_score,"
                    "purpose_score,interval_score,mode_score,overall\n";
  for (const auto& r : rows) {
    csv += r.persona_id + "," + to_string(r.source) + "," + to_string(r.score.cohort_level) +
           "," + std::to_string(r.score.cohort_size) + "," +
           format_number(r.score.trip_count_score) + "," + format_number(r.score.purpose_score) +
           "," + format_number(r.score.interval_score) + "," + format_number(r.score.mode_score) +
           "," + format_number(r.score.overall) + "\n";
  }
  std::string scores_path = config.out_dir + "/scores.csv";
  write_file(scores_path, csv);
  write_sidecar(config, scores_path, {{"hts_outlier_trips_removed", outliers_removed}});

  std::ostringstream summary;
  summary << "engine  n  mean  median  sd\n";
  for (const auto& [source, vals] : overall_by_source) {
    summary << source << "  " << vals.size() << "  " << format_number(mean_of(vals)) << "  "
            << format_number(median_of(vals)) << "  " << format_number(sd_of(vals)) << "\n";
    aggregate_json["summary"][source] = {{"n", vals.size()},
                                         {"mean", mean_of(vals)},
                                         {"median", median_of(vals)},
                                         {"sd", sd_of(vals)}};
  }
  if (overall_by_source.count("llm") && overall_by_source.count("classical")) {
    WelchResult wt =
        welch_t_test(overall_by_source.at("llm"), overall_by_source.at("classical"));
    summary << "welch_t=" << format_number(wt.t) << " df=" << format_number(wt.df)
            << " p=" << format_number(wt.p_two_sided) << "\n";
    aggregate_json["comparison"] = {
        {"welch_t", wt.t}, {"welch_df", wt.df}, {"p_two_sided", wt.p_two_sided}};
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  aggregate_json["metadata"] = {{"seed", config.seed},
                                {"config_hash", hex},
                                {"diary_files", diary_files},
                                {"scored_diaries", rows.size()},
                                {"hts_persons", persons.size()},
                                {"hts_outlier_trips_removed", outliers_removed}};
  write_file(config.out_dir + "/aggregate.json", aggregate_json.dump(2) + "\n");
  return summary.str();
}

void run_report(const RunConfig& config, const std::string& scores_path,
                const std::string& personas_path) {
  std::string text = read_file(scores_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw LoadError("empty scores file: " + scores_path);

  struct Row {
    std::string persona_id, source, level;
    double trip, purpose, interval, mode, overall;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else
        cur += c;
    }
    f.push_back(cur);
    if (f.size() != 9) throw LoadError("bad scores row: " + line);
    rows.push_back({f[0], f[1], f[2], std::stod(f[4]), std::stod(f[5]), std::stod(f[6]),
                    std::stod(f[7]), std::stod(f[8])});
  }
  fs::create_directories(config.out_dir);

  // Density histogram of overall scores, fixed edges 0.0 .. 1.0 step 0.05.
  {
    std::map<std::string, std::vector<int>> hist;
    for (const auto& r : rows) {
      auto& h = hist[r.source];
      if (h.empty()) h.assign(20, 0);
      int bin = std::min(19, static_cast<int>(r.overall / 0.05));
      h[bin]++;
    }
    std::string out = "source,bin_lo,bin_hi,count\n";
    for (const auto& [source, h] : hist)
      for (int b = 0; b < 20; ++b)
        out += source + "," + format_number(b * 0.05) + "," + format_number((b + 1) * 0.05) +
               "," + std::to_string(h[b]) + "\n";
    write_file(config.out_dir + "/report_density.csv", out);
    write_sidecar(config, config.out_dir + "/report_density.csv");
  }

  // Per (level, component) means.
  {
    std::map<std::string, std::pair<double, int>> acc;  // "source|level|component"
    auto add = [&](const std::string& key, double v) {
      auto& [sum, n] = acc[key];
      sum += v;
      n += 1;
    };
    for (const auto& r : rows) {
      std::string base = r.source + "," + r.level + ",";
      add(base + "trip_count", r.trip);
      add(base + "purpose", r.purpose);
      add(base + "interval", r.interval);
      add(base + "mode", r.mode);
      add(base + "overall", r.overall);
    }
    std::string out = "source,cohort_level,component,mean,count\n";
    for (const auto& [key, v] : acc)
      out += key + "," + format_number(v.first / v.second) + "," + std::to_string(v.second) + "\n";
    write_file(config.out_dir + "/report_levels.csv", out);
    write_sidecar(config, config.out_dir + "/report_levels.csv");
  }

  // Subgroup means (employment x age bracket) when personas are given.
  if (!personas_path.empty()) {
    auto personas = personas_from_jsonl_file(personas_path);
    std::map<std::string, const Persona*> by_id;
    for (const auto& p : personas) by_id[p.persona_id] = &p;
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : rows) {
      auto it = by_id.find(r.persona_id);
      if (it == by_id.end()) continue;
      std::string key = r.source + "," + to_string(it->second->employment_status) + "," +
                        it->second->age_bracket;
      auto& [sum, n] = acc[key];
      sum += r.overall;
      n += 1;
    }
    std::string out = "source,employment_status,age_bracket,mean_overall,count\n";
    for (const auto& [key, v] : acc)
      out += key + "," + format_number(v.first / v.second) + "," + std::to_string(v.second) + "\n";
    write_file(config.out_dir + "/report_subgroups.csv", out);
    write_sidecar(config, config.out_dir + "/report_subgroups.csv");
  }
}

}  // namespace td
