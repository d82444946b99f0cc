// Regenerates the deterministic example dataset under fixtures/: three
// block-group profiles, a synthetic HTS, scripted mock backend responses,
// and a matching run config. Usage: gen_fixtures [out_dir]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "td/classical.hpp"
#include "td/pipeline.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kBrackets = {"18-34", "35-54", "55-64", "65+"};

td::Distribution dist(std::vector<std::string> cats, std::vector<double> mass) {
  return td::Distribution{std::move(cats), std::move(mass), false};
}

td::BlockGroupProfile make_profile(const std::string& geoid, double emp_rate,
                                   std::string income, double intersection, double pop,
                                   double mix, double transit, double hh,
                                   std::vector<double> veh_mass) {
  td::BlockGroupProfile p;
  p.geoid = geoid;
  p.employment_rate = emp_rate;
  p.age_distribution_by_employment["employed"] =
      dist(kBrackets, {0.35, 0.4, 0.18, 0.07});
  p.age_distribution_by_employment["unemployed"] =
      dist(kBrackets, {0.2, 0.15, 0.2, 0.45});
  p.income_level = std::move(income);
  p.intersection_density = intersection;
  td::DensityTiers tiers;
  p.vehicle_count_distribution[p.income_level + "|" + tiers.tier_for(intersection)] =
      dist({"0", "1", "2", "3+"}, std::move(veh_mass));
  p.mean_household_size = hh;
  p.population_density = pop;
  p.employment_mix = mix;
  p.transit_access = transit;
  return p;
}

std::string diary_csv(const std::vector<std::array<std::string, 5>>& rows, bool fenced,
                      bool preamble) {
  std::string out;
  if (preamble) out += "Here is the travel diary:\n";
  if (fenced) out += "```csv\n";
  out += std::string(td::kDiaryCsvHeader) + "\n";
  for (const auto& r : rows) out += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "," + r[4] + "\n";
  if (fenced) out += "```\n";
  return out;
}

void write(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << path << "\n";
    std::exit(1);
  }
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir = argc > 1 ? argv[1] : "fixtures";
  fs::create_directories(out_dir);

  std::vector<td::BlockGroupProfile> profiles = {
      make_profile("090010001001", 0.70, "$100k or more", 120.0, 4500.0, 0.55, 0.8, 2.47,
                   {0.05, 0.25, 0.45, 0.25}),
      make_profile("090010001002", 0.50, "$25k-$49,999", 220.0, 12000.0, 0.40, 0.2, 1.8,
                   {0.35, 0.40, 0.20, 0.05}),
      make_profile("090010001003", 0.60, "$50k-$74,999", 30.0, 900.0, 0.70, 3.5, 3.2,
                   {0.05, 0.20, 0.45, 0.30})};
  write(out_dir + "/blockgroups.json", td::block_groups_to_json(profiles));

  // Synthetic HTS: persons sampled from the same profiles, trips from
  // simple employment-conditioned templates.
  const td::CategorySchema schema = td::CategorySchema::defaults();
  td::DensityTiers tiers;
  std::vector<td::PersonRecord> persons;
  const int kPersons = 160;
  for (int i = 0; i < kPersons; ++i) {
    const td::BlockGroupProfile& bg = profiles[i % profiles.size()];
    td::SeededSampler sampler(424242, static_cast<uint64_t>(i));
    char id[16];
    std::snprintf(id, sizeof(id), "H%04d", i);
    td::PersonRecord r;
    r.person_id = id;
    r.survey_weight = 50.0 + 250.0 * sampler.uniform();
    r.demographics = td::synthesize_persona(bg, id, tiers, sampler);
    r.demographics.persona_id = id;
    // a block of six-variable lookalikes so the strictest cohort level is reachable
    if (i % profiles.size() == 0 && i < 48) {
      r.demographics.employment_status = td::EmploymentStatus::employed;
      r.demographics.age_bracket = "35-54";
      r.demographics.household_vehicles = 2;
      r.demographics.household_size = 2;
    }
    // persona hh size is the rounded block-group mean; keep most persons there
    if (sampler.uniform() < 0.25)
      r.demographics.household_size = 1 + static_cast<int>(sampler.uniform() * 4);

    bool employed = r.demographics.employment_status == td::EmploymentStatus::employed;
    bool carless = r.demographics.household_vehicles == 0;
    std::string car_mode = carless ? "Public Transit" : "Household Vehicle Driver";
    auto trip = [&](int s, int e, std::string purpose, std::string mode, double miles) {
      td::PersonEvent ev;
      ev.kind = td::EventKind::trip;
      ev.start_time = s;
      ev.end_time = e;
      ev.purpose = std::move(purpose);
      ev.mode = std::move(mode);
      ev.distance_miles = miles;
      ev.travelers = 1;
      return ev;
    };
    auto activity = [&](int s, int e, std::string purpose) {
      td::PersonEvent ev;
      ev.kind = td::EventKind::activity;
      ev.start_time = s;
      ev.end_time = e;
      ev.purpose = std::move(purpose);
      return ev;
    };

    int jitter = static_cast<int>(sampler.uniform() * 40);
    if (employed) {
      int dep = 420 + jitter;
      r.events.push_back(activity(0, dep, "Home"));
      r.events.push_back(trip(dep, dep + 25, "Work", car_mode, 6.0 + 4.0 * sampler.uniform()));
      if (sampler.uniform() < 0.5) {
        r.events.push_back(activity(dep + 25, 720, "Work"));
        r.events.push_back(trip(720, 735, "Meal", sampler.uniform() < 0.5 ? "Walk" : car_mode,
                                0.5 + sampler.uniform()));
        r.events.push_back(trip(770, 785, "Work", sampler.uniform() < 0.5 ? "Walk" : car_mode,
                                0.5 + sampler.uniform()));
      }
      int ret = 1020 + jitter;
      r.events.push_back(activity(785, ret, "Work"));
      r.events.push_back(trip(ret, ret + 28, "Home", car_mode, 6.0 + 4.0 * sampler.uniform()));
      if (sampler.uniform() < 0.4) {
        const std::string evening[3] = {"Shopping", "Errands", "Medical"};
        r.events.push_back(trip(ret + 90, ret + 110,
                                evening[static_cast<size_t>(sampler.uniform() * 3.0)],
                                car_mode, 2.0 + 2.0 * sampler.uniform()));
      }
    } else {
      int n = static_cast<int>(sampler.uniform() * 3.0);  // 0..2 outings
      int t = 560 + jitter;
      r.events.push_back(activity(0, t, "Home"));
      const std::string purposes[4] = {"Shopping", "Errands", "Social/Recreation", "Medical"};
      for (int k = 0; k < n; ++k) {
        std::string mode = carless ? (sampler.uniform() < 0.5 ? "Walk" : "Public Transit")
                                   : "Household Vehicle Driver";
        std::string purpose = purposes[static_cast<size_t>(sampler.uniform() * 4.0)];
        r.events.push_back(trip(t, t + 18, purpose, mode, 1.0 + 3.0 * sampler.uniform()));
        t += 18 + 60 + static_cast<int>(sampler.uniform() * 90);
      }
      if (n > 0)
        r.events.push_back(trip(t, t + 18, "Home",
                                carless ? "Public Transit" : "Household Vehicle Driver",
                                1.0 + 3.0 * sampler.uniform()));
    }
    // label noise so no purpose or mode is perfectly predicted by a
    // covariate (perfect separation would break the logit calibration)
    const std::string any_purpose[7] = {"Work",   "Shopping", "Errands", "Social/Recreation",
                                        "Meal",   "Medical",  "Home"};
    const std::string any_mode[4] = {"Household Vehicle Driver", "Walk", "Public Transit",
                                     "Household Vehicle Passenger"};
    for (auto& ev : r.events) {
      if (ev.kind != td::EventKind::trip) continue;
      if (sampler.uniform() < 0.1)
        ev.purpose = any_purpose[static_cast<size_t>(sampler.uniform() * 7.0)];
      if (sampler.uniform() < 0.1)
        ev.mode = any_mode[static_cast<size_t>(sampler.uniform() * 4.0)];
    }
    // a couple of extreme trips so the 3xIQR filter has work to do
    if (i == 7 || i == 93)
      r.events.push_back(trip(1300, 1430, "Other", "Other", 400.0));
    persons.push_back(std::move(r));
  }
  write(out_dir + "/hts.jsonl", td::hts_to_jsonl(persons));

  // Scripted mock responses: plausible diaries in several shapes, plus a
  // script whose first attempt is garbage to exercise the retry path.
  json scripts = json::array();
  td::SeededSampler rng(777, 0);
  const std::string modes[4] = {"Household Vehicle Driver", "Walk", "Public Transit",
                                "Household Vehicle Passenger"};
  const std::string purposes[6] = {"Work", "Shopping", "Errands", "Social/Recreation",
                                   "Meal", "Medical"};
  for (int s = 0; s < 24; ++s) {
    int n = 1 + static_cast<int>(rng.uniform() * 3.0);  // 1..3 out-trips
    int t = 400 + static_cast<int>(rng.uniform() * 120.0);
    std::vector<std::array<std::string, 5>> rows;
    std::string mode = modes[static_cast<size_t>(rng.uniform() * 4.0)];
    for (int k = 0; k < n; ++k) {
      int dur = 12 + static_cast<int>(rng.uniform() * 30.0);
      rows.push_back({td::format_hhmm(t), td::format_hhmm(t + dur),
                      purposes[static_cast<size_t>(rng.uniform() * 6.0)], mode,
                      td::format_number(1.0 + 8.0 * rng.uniform())});
      t += dur + 45 + static_cast<int>(rng.uniform() * 240.0);
      if (t > 1380) break;
    }
    if (t <= 1380) {
      int dur = 12 + static_cast<int>(rng.uniform() * 30.0);
      rows.push_back({td::format_hhmm(t), td::format_hhmm(std::min(t + dur, 1439)), "Home",
                      mode, td::format_number(1.0 + 8.0 * rng.uniform())});
    }
    bool fenced = s % 3 == 0;
    bool preamble = s % 5 == 0;
    if (s == 11) {
      scripts.push_back(json::array(
          {"I cannot produce a diary right now.", diary_csv(rows, fenced, preamble)}));
    } else {
      scripts.push_back(json::array({diary_csv(rows, fenced, preamble)}));
    }
  }
  write(out_dir + "/mock_responses.json", scripts.dump(2) + "\n");

  td::RunConfig config;
  config.seed = 7;
  config.block_groups_path = out_dir + "/blockgroups.json";
  config.hts_path = out_dir + "/hts.jsonl";
  config.out_dir = "out";
  config.persona_count = 200;
  config.engine = "both";
  config.workers = 2;
  config.mock_responses_path = out_dir + "/mock_responses.json";
  write(out_dir + "/config.json", td::run_config_to_json(config));

  std::cout << "fixtures written to " << out_dir << "\n";
  return 0;
}
