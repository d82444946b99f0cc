#include "td/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace td {

using nlohmann::json;

DecodingParams decoding_params(const Persona& persona, const GenerationConfig& config) {
  return persona.employment_status == EmploymentStatus::employed ? config.employed_params
                                                                 : config.unemployed_params;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ", ";
    out += labels[i];
  }
  return out;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Case-insensitive match of a raw label against the schema list; returns
// the canonical label or nullopt.
std::optional<std::string> normalize_label(const std::string& raw,
                                           const std::vector<std::string>& labels) {
  std::string t = trim(raw);
  if (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') ||
                        (t.front() == '\'' && t.back() == '\'')))
    t = trim(t.substr(1, t.size() - 2));
  std::string tl = lower(t);
  for (const auto& l : labels)
    if (lower(l) == tl) return l;
  return std::nullopt;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_distance(const std::string& raw) {
  std::string t = lower(trim(raw));
  const std::string suffix = "miles";
  if (t.size() > suffix.size() && t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0)
    t = trim(t.substr(0, t.size() - suffix.size()));
  if (t.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string build_prompt(const Persona& persona, const std::string& land_use_text,
                         const CategorySchema& schema) {
  std::string p;
  p += "Act as the following person and write their travel diary for a single "
       "typical weekday.\n\n";
  p += "Your profile:\n";
  p += "- Home census block group (GEOID): " + persona.geoid + "\n";
  p += "- Employment status: " + to_string(persona.employment_status) + "\n";
  p += "- Age bracket: " + persona.age_bracket + "\n";
  p += "- Household vehicles: " + std::to_string(persona.household_vehicles) + "\n";
  p += "- Household income: " + persona.income_level + "\n";
  p += "- Household size: " + std::to_string(persona.household_size) + " person(s)\n\n";
  p += "Where you live: " + land_use_text + "\n\n";
  p += "Rules:\n";
  p += "- Use only these trip purposes: " + join_labels(schema.purposes) + "\n";
  p += "- Use only these travel modes: " + join_labels(schema.modes) + "\n";
  p += "- Times are 24-hour HH:MM; the diary covers one single weekday.\n";
  p += "- Output ONLY CSV rows, one trip per row, no commentary.\n";
  p += "- The first line must be exactly this header:\n";
  p += std::string(kDiaryCsvHeader) + "\n";
  return p;
}

ParseResult parse_diary_response(const std::string& text, const CategorySchema& schema) {
  std::istringstream in(text);
  std::string line;
  bool in_fence = false;
  bool saw_header = false;
  std::vector<TripRecord> rows;
  std::vector<RowDiagnostic> diags;
  int candidate = 0;

  const std::string header_lc = lower(kDiaryCsvHeader);
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.rfind("```", 0) == 0) {
      in_fence = !in_fence;
      continue;
    }
    if (t.empty()) continue;
    std::string tl = lower(t);
    if (tl == header_lc || tl == "persona_id," + header_lc) {
      saw_header = true;
      continue;
    }
    auto fields = split_fields(t);
    if (fields.size() != 5) continue;  // prose or malformed shape: preamble/postamble
    auto st = parse_hhmm(fields[0]);
    auto et = parse_hhmm(fields[1]);
    if (!st && !et) continue;  // five commas but no time anywhere: treat as prose
    ++candidate;
    TripRecord rec;
    bool row_ok = true;
    auto fail = [&](const std::string& field, const std::string& msg) {
      diags.push_back({candidate, field, msg});
      row_ok = false;
    };
    if (!st)
      fail("start_time", "malformed time: " + trim(fields[0]));
    else
      rec.start_time = *st;
    if (!et)
      fail("end_time", "malformed time: " + trim(fields[1]));
    else
      rec.end_time = *et;
    if (auto purpose = normalize_label(fields[2], schema.purposes))
      rec.purpose = *purpose;
    else
      fail("purpose", "unknown purpose: " + trim(fields[2]));
    if (auto mode = normalize_label(fields[3], schema.modes))
      rec.mode = *mode;
    else
      fail("mode", "unknown mode: " + trim(fields[3]));
    if (auto dist = parse_distance(fields[4]); dist && *dist >= 0.0)
      rec.distance_miles = *dist;
    else
      fail("distance_miles", "bad distance: " + trim(fields[4]));
    if (row_ok) rows.push_back(rec);
  }

  if (!diags.empty()) return ParseFailure{"invalid diary rows", std::move(diags)};
  if (rows.empty() && !saw_header)
    return ParseFailure{"no diary rows found", {}};

  std::stable_sort(rows.begin(), rows.end(),
                   [](const TripRecord& a, const TripRecord& b) {
                     return a.start_time < b.start_time;
                   });
  Diary diary;
  diary.trips = std::move(rows);
  auto violations = validate_diary(diary, schema);
  if (!violations.empty()) {
    ParseFailure f{"diary invariant violations", {}};
    for (const auto& v : violations) f.rows.push_back({0, "diary", v});
    return f;
  }
  return diary;
}

HttpBackend::HttpBackend(GenerationConfig config) : config_(std::move(config)) {}

std::string HttpBackend::complete(const std::string& prompt, const DecodingParams& params) {
  httplib::Client client(config_.endpoint_url);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout);
  client.set_connection_timeout(secs.count(), 0);
  client.set_read_timeout(secs.count(), 0);
  json body;
  body["model"] = config_.model_name;
  body["prompt"] = prompt;
  body["options"] = {{"temperature", params.temperature}, {"top_p", params.top_p}};
  body["stream"] = false;
  auto res = client.Post("/api/generate", body.dump(), "application/json");
  if (!res)
    throw TransportError("backend unreachable at " + config_.endpoint_url + ": " +
                         httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("backend returned HTTP " + std::to_string(res->status));
  try {
    json j = json::parse(res->body);
    return j.at("response").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed backend response: ") + e.what());
  }
}

MockBackend::MockBackend(std::vector<std::vector<std::string>> scripts)
    : scripts_(std::move(scripts)) {
  if (scripts_.empty()) throw ConfigurationError("MockBackend needs at least one script");
  for (const auto& s : scripts_)
    if (s.empty()) throw ConfigurationError("MockBackend script with no responses");
}

MockBackend::MockBackend(const std::string& fixture_path)
    : MockBackend(scripts_from_file(fixture_path)) {}

std::vector<std::vector<std::string>> MockBackend::scripts_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open mock response file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigurationError(path + ": " + e.what());
  }
  std::vector<std::vector<std::string>> scripts;
  for (const auto& entry : doc) {
    if (entry.is_string())
      scripts.push_back({entry.get<std::string>()});
    else
      scripts.push_back(entry.get<std::vector<std::string>>());
  }
  return scripts;
}

std::string MockBackend::complete(const std::string& prompt, const DecodingParams&) {
  uint64_t h = fnv1a(prompt);
  size_t attempt;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    attempt = attempts_[h]++;
  }
  const auto& script = scripts_[h % scripts_.size()];
  return script[std::min(attempt, script.size() - 1)];
}

GenerationResult generate_diary(const Persona& persona, const std::string& land_use_text,
                                Backend& backend, const GenerationConfig& config,
                                const CategorySchema& schema) {
  const std::string prompt = build_prompt(persona, land_use_text, schema);
  const DecodingParams params = decoding_params(persona, config);
  GenerationFailure failure{persona.persona_id, {}};
  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    std::string response = backend.complete(prompt, params);
    ParseResult parsed = parse_diary_response(response, schema);
    if (auto* diary = std::get_if<Diary>(&parsed)) {
      diary->persona_id = persona.persona_id;
      diary->source = DiarySource::llm;
      return *diary;
    }
    const auto& pf = std::get<ParseFailure>(parsed);
    std::string detail = pf.reason;
    for (const auto& d : pf.rows)
      detail += "; row " + std::to_string(d.row) + " " + d.field + ": " + d.message;
    failure.attempts.push_back({attempt + 1, detail});
  }
  return failure;
}

}  // namespace td
