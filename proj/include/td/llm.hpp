#pragma once
// Prompt construction, backend adapters, and CSV diary response parsing.
// The backend is an interface so alternative wire schemas plug in without
// touching generation logic; MockBackend is part of the public surface.

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "td/core.hpp"
#include "td/persona.hpp"

namespace td {

struct DecodingParams {
  double temperature = 0.5;  // (0, 2]
  double top_p = 0.9;        // (0, 1]
};

struct GenerationConfig {
  std::string model_name = "llama3";
  std::string endpoint_url = "http://localhost:11434";
  int max_retries = 2;  // >= 0; retries beyond the first attempt
  std::chrono::milliseconds request_timeout{60000};
  DecodingParams employed_params{0.5, 0.9};
  DecodingParams unemployed_params{0.3, 0.8};
};

// Employment-conditioned decoding policy: employed personas get more
// diverse decoding, unemployed more routine output.
DecodingParams decoding_params(const Persona& persona, const GenerationConfig& config);

// Single comprehensive prompt: act-as framing, full demographic profile,
// land-use context verbatim, the allowed purpose/mode lists, the exact CSV
// header, and a CSV-only single-weekday instruction. Pure function.
std::string build_prompt(const Persona& persona, const std::string& land_use_text,
                         const CategorySchema& schema);

struct RowDiagnostic {
  int row = 0;  // 1-based index among candidate data rows
  std::string field;
  std::string message;
};

struct ParseFailure {
  std::string reason;
  std::vector<RowDiagnostic> rows;
};

using ParseResult = std::variant<Diary, ParseFailure>;

// Total over arbitrary byte input: strips code fences and prose, parses
// candidate CSV rows, normalizes labels case-insensitively, sorts rows by
// start time. Any row-level or ordering violation yields ParseFailure with
// per-row diagnostics; never throws on malformed text.
ParseResult parse_diary_response(const std::string& text, const CategorySchema& schema);

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  // Returns generated text; throws TransportError on connection failure,
  // timeout, or a non-success server response.
  virtual std::string complete(const std::string& prompt, const DecodingParams& params) = 0;
};

// Ollama-style HTTP JSON completion endpoint: POST /api/generate with
// {model, prompt, options: {temperature, top_p}, stream: false}; the
// generated text comes back in a `response` field.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(GenerationConfig config);
  std::string complete(const std::string& prompt, const DecodingParams& params) override;

 private:
  GenerationConfig config_;
};

// Scripted backend for tests and offline runs. The fixture file is a JSON
// array of scripts, each script an array of responses returned on
// successive attempts for the same prompt (last entry repeats). The script
// is selected by a stable hash of the prompt, so results do not depend on
// request interleaving across workers.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::vector<std::vector<std::string>> scripts);
  explicit MockBackend(const std::string& fixture_path);
  static std::vector<std::vector<std::string>> scripts_from_file(const std::string& path);
  std::string complete(const std::string& prompt, const DecodingParams& params) override;

 private:
  std::vector<std::vector<std::string>> scripts_;
  std::mutex mutex_;
  std::unordered_map<uint64_t, size_t> attempts_;  // prompt hash -> attempts served
};

struct AttemptRecord {
  int attempt = 0;
  std::string error;  // parse reason or transport error
};

struct GenerationFailure {
  std::string persona_id;
  std::vector<AttemptRecord> attempts;
};

using GenerationResult = std::variant<Diary, GenerationFailure>;

// Sends the prompt with the persona's decoding params; on ParseFailure
// re-sends the identical prompt up to config.max_retries times. Transport
// errors propagate as TransportError.
GenerationResult generate_diary(const Persona& persona, const std::string& land_use_text,
                                Backend& backend, const GenerationConfig& config,
                                const CategorySchema& schema);

}  // namespace td
