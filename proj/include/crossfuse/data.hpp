#pragma once

// Review-corpus plumbing: line-delimited JSON ingestion over the familiar
// three-file review/user/business schema, text cleanup, category filters,
// 15-column tabular feature derivation, splits, token strata, and a seeded
// synthetic corpus generator for desk-scale experiments.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossfuse/rng.hpp"
#include "crossfuse/text.hpp"
#include "crossfuse/util.hpp"

namespace crossfuse {

constexpr size_t kTabFeatureCount = 15;
constexpr size_t kFirstCountFeature = 9;  // columns 9..14 hold raw activity counts

inline const std::array<const char*, kTabFeatureCount>& tab_feature_names() {
  static const std::array<const char*, kTabFeatureCount> names = {
      "open_dow", "open_hours", "open_mon", "open_tue", "open_wed",
      "open_thu", "open_fri",   "open_sat", "open_sun", "n_friends",
      "n_fans",   "n_elites",   "n_useful", "n_funny",  "n_cool"};
  return names;
}

struct ReviewRecord {
  std::string user_id;
  std::string business_id;
  int stars = 0;
  std::string date;  // "YYYY-MM-DD" or "YYYY-MM-DD HH:MM:SS"; compares lexicographically
  std::string text;
  int useful = 0, funny = 0, cool = 0;
  int n_friends = 0, n_fans = 0, n_elites = 0;
  // Monday..Sunday, minutes since midnight; open_minute < 0 means closed.
  std::array<int, 7> open_minute = {-1, -1, -1, -1, -1, -1, -1};
  std::array<int, 7> close_minute = {-1, -1, -1, -1, -1, -1, -1};
  std::vector<std::string> categories;
};

struct Example {
  TokenSequence seq;
  std::vector<double> x_tab;  // kTabFeatureCount entries, fixed order as named above
  double y = 0.0;             // rating scaled to [0, 1]
};

struct SplitDataset {
  std::vector<Example> train, validation, test;
};

// ---------------------------------------------------------------------------
// Text cleanup

inline bool is_allowed_review_char(unsigned char c) {
  if (std::isalnum(c) || c == ' ') return true;
  static const std::string extra = ",.!?'\"()-:;$%&/@";
  return extra.find(static_cast<char>(c)) != std::string::npos;
}

// Replaces every disallowed byte (line breaks, emoji bytes, stray symbols)
// with ".", collapses runs of two or more periods -- even when separated by
// spaces -- into a single ".", and trims outer whitespace. Idempotent.
inline std::string preprocess_text(const std::string& raw) {
  std::string mapped;
  mapped.reserve(raw.size());
  for (unsigned char c : raw) mapped.push_back(is_allowed_review_char(c) ? char(c) : '.');

  std::string out;
  out.reserve(mapped.size());
  size_t i = 0;
  while (i < mapped.size()) {
    size_t p = i, reps = 0, end = i;
    while (true) {  // match ([ ]* ".")+ starting at i
      size_t q = p;
      while (q < mapped.size() && mapped[q] == ' ') ++q;
      if (q < mapped.size() && mapped[q] == '.') {
        ++q;
        ++reps;
        p = end = q;
      } else {
        break;
      }
    }
    if (reps >= 2) {
      out.push_back('.');
      i = end;
    } else {
      out.push_back(mapped[i]);
      ++i;
    }
  }
  return trim(out);
}

inline bool has_english_word(const std::string& text) {
  for (const auto& tok : Vocabulary::word_tokens(text))
    for (unsigned char c : tok)
      if (std::isalpha(c)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Filters

enum class Category { kRestaurants, kNightlife, kCafe };

inline Category category_from_name(const std::string& name) {
  if (name == "restaurants") return Category::kRestaurants;
  if (name == "nightlife") return Category::kNightlife;
  if (name == "cafe") return Category::kCafe;
  throw UsageError("unknown category: " + name + " (expected restaurants, nightlife, or cafe)");
}

inline std::string category_name(Category c) {
  switch (c) {
    case Category::kRestaurants: return "restaurants";
    case Category::kNightlife: return "nightlife";
    case Category::kCafe: return "cafe";
  }
  throw ValueError("unknown category");
}

inline bool matches_category(const ReviewRecord& r, Category c) {
  auto has = [&r](const char* tag) {
    return std::find(r.categories.begin(), r.categories.end(), tag) != r.categories.end();
  };
  switch (c) {
    case Category::kRestaurants:
      return has("Restaurants") && !has("Fast Food") && !has("Food Truck") && !has("Nightlife") &&
             !has("Bar");
    case Category::kNightlife:
      return has("Restaurants") && has("Nightlife") && !has("Fast Food") && !has("Food Truck");
    case Category::kCafe:
      return has("Cafes") && has("Coffee and Tea") && !has("Fast Food") && !has("Food Truck");
  }
  throw ValueError("unknown category");
}

inline std::vector<ReviewRecord> filter_category(const std::vector<ReviewRecord>& records,
                                                 Category c) {
  std::vector<ReviewRecord> out;
  for (const auto& r : records)
    if (matches_category(r, c)) out.push_back(r);
  return out;
}

// Keeps the latest post per (user, business) pair; equal dates keep the one
// later in the input. Survivors stay in input order.
inline std::vector<ReviewRecord> dedup_latest(const std::vector<ReviewRecord>& records) {
  std::map<std::pair<std::string, std::string>, size_t> latest;
  for (size_t i = 0; i < records.size(); ++i) {
    auto key = std::make_pair(records[i].user_id, records[i].business_id);
    auto it = latest.find(key);
    if (it == latest.end() || records[i].date >= records[it->second].date) latest[key] = i;
  }
  std::vector<size_t> keep;
  keep.reserve(latest.size());
  for (const auto& kv : latest) keep.push_back(kv.second);
  std::sort(keep.begin(), keep.end());
  std::vector<ReviewRecord> out;
  out.reserve(keep.size());
  for (size_t i : keep) out.push_back(records[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Feature derivation

// Open duration in minutes for one day; spans with close < open wrap past
// midnight, and the conventional "0:0-0:0" marker means open all day.
inline int open_duration_minutes(int open_minute, int close_minute) {
  if (open_minute < 0) return 0;
  if (open_minute == 0 && close_minute == 0) return 24 * 60;
  if (close_minute >= open_minute) return close_minute - open_minute;
  return 24 * 60 - open_minute + close_minute;
}

// The 15 features in fixed order: open-day share, weekly-hours share, the
// seven daily-hours shares, then the six raw activity counts (normalized
// later against the training split unless raw mode is requested).
inline std::vector<double> derive_tabular(const ReviewRecord& r) {
  std::vector<double> x(kTabFeatureCount, 0.0);
  int open_days = 0;
  double weekly_hours = 0.0;
  for (size_t d = 0; d < 7; ++d) {
    double hours = open_duration_minutes(r.open_minute[d], r.close_minute[d]) / 60.0;
    if (r.open_minute[d] >= 0) ++open_days;
    weekly_hours += hours;
    x[2 + d] = hours / 24.0;
  }
  x[0] = open_days / 7.0;
  x[1] = weekly_hours / 168.0;
  x[9] = r.n_friends;
  x[10] = r.n_fans;
  x[11] = r.n_elites;
  x[12] = r.useful;
  x[13] = r.funny;
  x[14] = r.cool;
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("non-finite tabular feature");
  return x;
}

inline double normalize_rating(int stars) {
  if (stars < 1 || stars > 5)
    throw ValueError(strprintf("stars must be an integer in 1..5, got %d", stars));
  return (stars - 1) / 4.0;
}

// ---------------------------------------------------------------------------
// Splits and normalization

// Seeded shuffle, then a contiguous 70/15/15 cut (sizes floored, remainder
// to the test split).
inline SplitDataset split_dataset(std::vector<Example> examples, uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(examples);
  size_t n = examples.size();
  size_t n_train = n * 7 / 10;
  size_t n_val = n * 3 / 20;
  SplitDataset ds;
  ds.train.assign(examples.begin(), examples.begin() + n_train);
  ds.validation.assign(examples.begin() + n_train, examples.begin() + n_train + n_val);
  ds.test.assign(examples.begin() + n_train + n_val, examples.end());
  return ds;
}

// Min-max rescales the six count columns using extrema measured on the
// training split only; a constant column maps to 0. Validation/test values
// outside the training range deliberately land outside [0, 1].
inline void normalize_count_features(SplitDataset& ds) {
  if (ds.train.empty()) throw ValueError("count normalization needs a nonempty training split");
  for (size_t col = kFirstCountFeature; col < kTabFeatureCount; ++col) {
    double lo = ds.train[0].x_tab[col], hi = lo;
    for (const auto& e : ds.train) {
      lo = std::min(lo, e.x_tab[col]);
      hi = std::max(hi, e.x_tab[col]);
    }
    double span = hi - lo;
    for (auto* part : {&ds.train, &ds.validation, &ds.test})
      for (auto& e : *part) e.x_tab[col] = span > 0.0 ? (e.x_tab[col] - lo) / span : 0.0;
  }
}

// ---------------------------------------------------------------------------
// Token strata

struct StratumSummary {
  size_t count = 0;
  double mean_tokens = 0.0;
  double rmse = 0.0;  // meaningful only when predictions were supplied
};

// Stable-sorts by real token count (ascending) and cuts into k buckets whose
// sizes differ by at most one; earlier buckets absorb the remainder. Returns
// the bucket id per example.
inline std::vector<size_t> token_strata(const std::vector<Example>& part, size_t k) {
  if (k == 0) throw ValueError("token strata: k must be at least 1");
  std::vector<size_t> order(part.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&part](size_t a, size_t b) {
    return part[a].seq.n_tokens < part[b].seq.n_tokens;
  });
  std::vector<size_t> assignment(part.size(), 0);
  size_t base = part.size() / k, extra = part.size() % k, at = 0;
  for (size_t s = 0; s < k; ++s) {
    size_t take = base + (s < extra ? 1 : 0);
    for (size_t i = 0; i < take; ++i) assignment[order[at++]] = s;
  }
  return assignment;
}

inline std::vector<StratumSummary> strata_summary(const std::vector<Example>& part,
                                                  const std::vector<size_t>& assignment, size_t k,
                                                  const std::vector<double>* predictions = nullptr) {
  if (assignment.size() != part.size())
    throw ShapeError("strata summary: assignment does not match the examples");
  if (predictions && predictions->size() != part.size())
    throw ShapeError("strata summary: predictions do not match the examples");
  std::vector<StratumSummary> out(k);
  std::vector<double> sq(k, 0.0);
  for (size_t i = 0; i < part.size(); ++i) {
    size_t s = assignment[i];
    if (s >= k) throw ValueError("strata summary: assignment out of range");
    out[s].count += 1;
    out[s].mean_tokens += static_cast<double>(part[i].seq.n_tokens);
    if (predictions) {
      double d = (*predictions)[i] - part[i].y;
      sq[s] += d * d;
    }
  }
  for (size_t s = 0; s < k; ++s) {
    if (out[s].count == 0) continue;
    out[s].mean_tokens /= static_cast<double>(out[s].count);
    if (predictions) out[s].rmse = std::sqrt(sq[s] / static_cast<double>(out[s].count));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

// Star ratings depend on a sentiment signal in the text AND on its
// interaction with a user-profile column: frequent "elite" reviewers weigh
// the food sentence, casual ones the service sentence. Business hours add an
// independent tabular-only term. Neither modality alone explains the rating.
inline std::vector<ReviewRecord> synth_generate(size_t n, uint64_t seed, double sigma) {
  if (n == 0) throw ValueError("synthetic corpus size must be positive");
  if (sigma < 0.0) throw ValueError("noise level must be nonnegative");
  static const std::array<const char*, 9> adjectives = {
      "terrible", "awful", "bad", "mediocre", "okay", "good", "great", "excellent", "fantastic"};
  static const std::array<const char*, 4> openers = {
      "I visited last week.", "We came in for dinner.", "Stopped by on a whim.",
      "My third time here."};
  static const std::array<const char*, 6> fillers = {
      "The menu had many options.",   "Parking was easy to find.",
      "The room was fairly busy.",    "Prices were about average.",
      "Staff wore matching aprons.",  "Music played in the background."};

  Rng rng(seed);
  std::vector<ReviewRecord> out;
  out.reserve(n);
  size_t n_businesses = std::max<size_t>(1, n / 5);

  // A small pool of businesses with fixed schedules so hours vary coherently.
  std::vector<std::array<int, 7>> biz_open(n_businesses), biz_close(n_businesses);
  for (size_t b = 0; b < n_businesses; ++b) {
    size_t open_days = 4 + rng.below(4);  // 4..7
    std::vector<size_t> days = rng.permutation(7);
    biz_open[b].fill(-1);
    biz_close[b].fill(-1);
    for (size_t d = 0; d < open_days; ++d) {
      int open = 60 * static_cast<int>(6 + rng.below(6));    // 06:00..11:00
      int close = 60 * static_cast<int>(14 + rng.below(10)); // 14:00..23:00
      biz_open[b][days[d]] = open;
      biz_close[b][days[d]] = close;
    }
  }

  const double c_interaction = 0.45, c_tabular = 0.25, mean_hours_share = 0.35;
  for (size_t i = 0; i < n; ++i) {
    ReviewRecord r;
    r.user_id = strprintf("synth-user-%06zu", i);
    size_t b = rng.below(n_businesses);
    r.business_id = strprintf("synth-biz-%04zu", b);
    r.open_minute = biz_open[b];
    r.close_minute = biz_close[b];
    r.categories = {"Restaurants", "Synthetic"};
    r.date = strprintf("2018-%02zu-%02zu 12:00:00", 1 + rng.below(12), 1 + rng.below(28));

    bool elite_profile = rng.below(2) == 1;
    r.n_elites = elite_profile ? static_cast<int>(3 + rng.below(6)) : static_cast<int>(rng.below(2));
    r.n_friends = static_cast<int>(rng.below(200));
    r.n_fans = static_cast<int>(rng.below(50));
    r.useful = static_cast<int>(rng.below(10));
    r.funny = static_cast<int>(rng.below(10));
    r.cool = static_cast<int>(rng.below(10));

    size_t food_idx = rng.below(adjectives.size());
    size_t service_idx = rng.below(adjectives.size());
    double food = food_idx * 0.25 - 1.0, service = service_idx * 0.25 - 1.0;

    std::string text;
    size_t n_open = rng.below(3);
    for (size_t k = 0; k < n_open; ++k) text += std::string(openers[rng.below(openers.size())]) + " ";
    text += strprintf("The food was %s. ", adjectives[food_idx]);
    text += strprintf("The service was %s.", adjectives[service_idx]);
    size_t n_fill = rng.below(7);
    for (size_t k = 0; k < n_fill; ++k)
      text += " " + std::string(fillers[rng.below(fillers.size())]);
    r.text = text;

    double weekly_hours = 0.0;
    for (size_t d = 0; d < 7; ++d)
      weekly_hours += open_duration_minutes(r.open_minute[d], r.close_minute[d]) / 60.0;
    double hours_share = weekly_hours / 168.0;

    double sentiment = elite_profile ? food : service;
    double latent = 0.5 + c_interaction * sentiment + c_tabular * (hours_share - mean_hours_share);
    if (sigma > 0.0) latent += rng.normal(0.0, sigma);
    latent = std::min(1.0, std::max(0.0, latent));
    r.stars = 1 + static_cast<int>(std::llround(4.0 * latent));
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Line-delimited JSON ingestion (review/user/business files)

struct IngestStats {
  size_t lines = 0;      // total lines across the three files
  size_t malformed = 0;  // unparseable or field-invalid lines (skipped)
  size_t unjoined = 0;   // reviews lacking user or business records
  size_t joined = 0;     // reviews fully joined into ReviewRecords
};

namespace detail {

// Counts comma-separated entries; accepts integers, arrays, null, or the
// literal "None" that some exports use for empty lists.
inline int count_listish(const nlohmann::json& v) {
  if (v.is_null()) return 0;
  if (v.is_number_integer()) return static_cast<int>(v.get<int64_t>());
  if (v.is_array()) return static_cast<int>(v.size());
  if (v.is_string()) {
    std::string s = trim(v.get<std::string>());
    if (s.empty() || s == "None") return 0;
    int count = 0;
    for (const auto& piece : split_on(s, ','))
      if (!trim(piece).empty()) ++count;
    return count;
  }
  throw DataError("expected a count, list, or comma-joined string");
}

inline int nonneg_int(const nlohmann::json& v) {
  if (!v.is_number_integer() || v.get<int64_t>() < 0)
    throw DataError("expected a nonnegative integer");
  return static_cast<int>(v.get<int64_t>());
}

inline int parse_clock_minutes(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw DataError("bad clock time: " + s);
  int h = std::stoi(s.substr(0, colon));
  int m = std::stoi(s.substr(colon + 1));
  if (h < 0 || h > 23 || m < 0 || m > 59) throw DataError("bad clock time: " + s);
  return h * 60 + m;
}

inline bool parse_date(const std::string& d) {
  if (d.size() != 10 && d.size() != 19) return false;
  for (size_t i = 0; i < d.size(); ++i) {
    char c = d[i];
    if (i == 4 || i == 7) {
      if (c != '-') return false;
    } else if (i == 10) {
      if (c != ' ') return false;
    } else if (i == 13 || i == 16) {
      if (c != ':') return false;
    } else if (!std::isdigit(static_cast<unsigned char>(c))) {
      return false;
    }
  }
  return true;
}

inline const std::array<const char*, 7>& day_names() {
  static const std::array<const char*, 7> names = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                                   "Friday", "Saturday", "Sunday"};
  return names;
}

struct UserInfo {
  int n_friends = 0, n_fans = 0, n_elites = 0;
};

struct BusinessInfo {
  std::array<int, 7> open_minute = {-1, -1, -1, -1, -1, -1, -1};
  std::array<int, 7> close_minute = {-1, -1, -1, -1, -1, -1, -1};
  std::vector<std::string> categories;
};

template <typename Fn>
void for_each_json_line(const std::string& path, IngestStats& stats, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open input file: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++stats.lines;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      fn(j);
    } catch (const std::exception&) {  // parse errors, bad fields, bad numbers
      ++stats.malformed;
    }
  }
}

}  // namespace detail

// Joins the three files into flat ReviewRecords. Individually bad lines are
// skipped and counted; more than 1% bad lines aborts the ingest.
inline std::vector<ReviewRecord> load_review_corpus(const std::string& review_path,
                                                    const std::string& user_path,
                                                    const std::string& business_path,
                                                    IngestStats* stats_out = nullptr) {
  IngestStats stats;
  std::unordered_map<std::string, detail::UserInfo> users;
  detail::for_each_json_line(user_path, stats, [&users](const nlohmann::json& j) {
    detail::UserInfo u;
    u.n_friends = detail::count_listish(j.at("friends"));
    u.n_fans = detail::nonneg_int(j.at("fans"));
    u.n_elites = detail::count_listish(j.at("elite"));
    users[j.at("user_id").get<std::string>()] = u;
  });

  std::unordered_map<std::string, detail::BusinessInfo> businesses;
  detail::for_each_json_line(business_path, stats, [&businesses](const nlohmann::json& j) {
    detail::BusinessInfo b;
    const auto& cats = j.at("categories");
    if (cats.is_string()) {
      for (const auto& piece : split_on(cats.get<std::string>(), ','))
        if (!trim(piece).empty()) b.categories.push_back(trim(piece));
    } else if (cats.is_array()) {
      for (const auto& c : cats) b.categories.push_back(trim(c.get<std::string>()));
    } else if (!cats.is_null()) {
      throw DataError("bad categories field");
    }
    if (j.contains("hours") && !j.at("hours").is_null()) {
      const auto& hours = j.at("hours");
      const auto& names = detail::day_names();
      for (size_t d = 0; d < 7; ++d) {
        if (!hours.contains(names[d])) continue;
        std::string span = hours.at(names[d]).get<std::string>();
        auto dash = span.find('-');
        if (dash == std::string::npos) throw DataError("bad hours span: " + span);
        b.open_minute[d] = detail::parse_clock_minutes(span.substr(0, dash));
        b.close_minute[d] = detail::parse_clock_minutes(span.substr(dash + 1));
      }
    }
    businesses[j.at("business_id").get<std::string>()] = b;
  });

  std::vector<ReviewRecord> out;
  detail::for_each_json_line(review_path, stats, [&](const nlohmann::json& j) {
    ReviewRecord r;
    r.user_id = j.at("user_id").get<std::string>();
    r.business_id = j.at("business_id").get<std::string>();
    const auto& stars = j.at("stars");
    double sv = stars.is_number() ? stars.get<double>() : -1.0;
    if (sv < 1.0 || sv > 5.0 || sv != std::floor(sv)) throw DataError("bad stars value");
    r.stars = static_cast<int>(sv);
    r.date = j.at("date").get<std::string>();
    if (!detail::parse_date(r.date)) throw DataError("bad date: " + r.date);
    r.text = j.at("text").get<std::string>();
    r.useful = detail::nonneg_int(j.at("useful"));
    r.funny = detail::nonneg_int(j.at("funny"));
    r.cool = detail::nonneg_int(j.at("cool"));
    auto u = users.find(r.user_id);
    auto b = businesses.find(r.business_id);
    if (u == users.end() || b == businesses.end()) {
      ++stats.unjoined;
      return;
    }
    r.n_friends = u->second.n_friends;
    r.n_fans = u->second.n_fans;
    r.n_elites = u->second.n_elites;
    r.open_minute = b->second.open_minute;
    r.close_minute = b->second.close_minute;
    r.categories = b->second.categories;
    out.push_back(std::move(r));
    ++stats.joined;
  });

  if (stats.lines > 0 && stats.malformed * 100 > stats.lines)
    throw DataError(strprintf("%zu of %zu input lines were malformed (over the 1%% budget)",
                              stats.malformed, stats.lines));
  if (stats_out) *stats_out = stats;
  return out;
}

// Writes a corpus back out as the three-file schema (used by the synthetic
// generator). Businesses are grouped by id; users are one line each.
inline void write_review_corpus(const std::vector<ReviewRecord>& records,
                                const std::string& review_path, const std::string& user_path,
                                const std::string& business_path) {
  std::ostringstream reviews, users_out, businesses_out;
  std::set<std::string> seen_users, seen_businesses;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    nlohmann::json rev = {
        {"review_id", strprintf("synth-review-%06zu", i)},
        {"user_id", r.user_id},
        {"business_id", r.business_id},
        {"stars", r.stars},
        {"date", r.date},
        {"text", r.text},
        {"useful", r.useful},
        {"funny", r.funny},
        {"cool", r.cool},
    };
    reviews << rev.dump() << "\n";

    if (seen_users.insert(r.user_id).second) {
      std::string elite;
      for (int e = 0; e < r.n_elites; ++e) {
        if (!elite.empty()) elite += ",";
        elite += std::to_string(2010 + e);
      }
      nlohmann::json u = {
          {"user_id", r.user_id},
          {"friends", r.n_friends},
          {"fans", r.n_fans},
          {"elite", elite},
      };
      users_out << u.dump() << "\n";
    }

    if (seen_businesses.insert(r.business_id).second) {
      nlohmann::json hours = nlohmann::json::object();
      const auto& names = detail::day_names();
      for (size_t d = 0; d < 7; ++d) {
        if (r.open_minute[d] < 0) continue;
        hours[names[d]] = strprintf("%d:%d-%d:%d", r.open_minute[d] / 60, r.open_minute[d] % 60,
                                    r.close_minute[d] / 60, r.close_minute[d] % 60);
      }
      std::string cats;
      for (const auto& c : r.categories) {
        if (!cats.empty()) cats += ", ";
        cats += c;
      }
      nlohmann::json b = {
          {"business_id", r.business_id},
          {"categories", cats},
          {"hours", r.open_minute == std::array<int, 7>{-1, -1, -1, -1, -1, -1, -1}
                        ? nlohmann::json()
                        : hours},
      };
      businesses_out << b.dump() << "\n";
    }
  }
  write_text_file(review_path, reviews.str());
  write_text_file(user_path, users_out.str());
  write_text_file(business_path, businesses_out.str());
}

// ---------------------------------------------------------------------------
// End-to-end dataset construction

struct PipelineConfig {
  Category category = Category::kRestaurants;
  int year = 0;              // keep only reviews from this year; 0 disables
  bool english_only = true;  // require at least one alphabetic token
  size_t sample_n = 10000;   // uniform sample size after dedup; 0 keeps all
  uint64_t seed = 1;
  size_t vocab_size = 1000;
  size_t len_max = 64;
};

struct BuiltDataset {
  std::vector<Example> examples;
  Vocabulary vocab;
};

// Pipeline order is fixed: category/year/English filters, then dedup, then
// the seeded sample, then text cleanup, vocabulary, tokens, and features.
inline BuiltDataset build_dataset(const std::vector<ReviewRecord>& records,
                                  const PipelineConfig& cfg) {
  std::vector<ReviewRecord> kept;
  for (const auto& r : filter_category(records, cfg.category)) {
    if (cfg.year != 0 && (r.date.size() < 4 || std::stoi(r.date.substr(0, 4)) != cfg.year))
      continue;
    if (cfg.english_only && !has_english_word(r.text)) continue;
    kept.push_back(r);
  }
  kept = dedup_latest(kept);
  if (cfg.sample_n > 0 && kept.size() > cfg.sample_n) {
    Rng rng(cfg.seed);
    std::vector<size_t> pick = rng.permutation(kept.size());
    pick.resize(cfg.sample_n);
    std::sort(pick.begin(), pick.end());
    std::vector<ReviewRecord> sampled;
    sampled.reserve(cfg.sample_n);
    for (size_t i : pick) sampled.push_back(std::move(kept[i]));
    kept = std::move(sampled);
  }
  if (kept.empty()) throw DataError("no records survived filtering");

  std::vector<std::string> cleaned;
  cleaned.reserve(kept.size());
  for (const auto& r : kept) cleaned.push_back(preprocess_text(r.text));

  BuiltDataset built;
  built.vocab = Vocabulary::build(cleaned, cfg.vocab_size);
  built.examples.reserve(kept.size());
  for (size_t i = 0; i < kept.size(); ++i) {
    Example e;
    e.seq = tokenize_fixed(built.vocab, cleaned[i], cfg.len_max);
    e.x_tab = derive_tabular(kept[i]);
    e.y = normalize_rating(kept[i].stars);
    built.examples.push_back(std::move(e));
  }
  return built;
}

// ---------------------------------------------------------------------------
// Canonical dataset file: one example per row, token ids pipe-joined.

inline void save_dataset_csv(const std::string& path, const std::vector<Example>& examples) {
  std::ostringstream out;
  out << "token_ids";
  for (const char* name : tab_feature_names()) out << "," << name;
  out << ",y\n";
  for (const auto& e : examples) {
    for (size_t i = 0; i < e.seq.ids.size(); ++i) {
      if (i) out << "|";
      out << e.seq.ids[i];
    }
    if (e.x_tab.size() != kTabFeatureCount) throw ShapeError("example feature width is not 15");
    for (double v : e.x_tab) out << "," << fmt_double(v);
    out << "," << fmt_double(e.y) << "\n";
  }
  write_text_file(path, out.str());
}

inline std::vector<Example> load_dataset_csv(const std::string& path) {
  std::string content = read_text_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file: " + path);
  std::string expected = "token_ids";
  for (const char* name : tab_feature_names()) expected += std::string(",") + name;
  expected += ",y";
  if (trim(line) != expected) throw DataError("unrecognized dataset header in " + path);
  std::vector<Example> out;
  size_t len_max = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_on(line, ',');
    if (fields.size() != kTabFeatureCount + 2)
      throw DataError(strprintf("dataset row with %zu fields (expected %zu) in %s", fields.size(),
                                kTabFeatureCount + 2, path.c_str()));
    Example e;
    auto id_fields = split_on(fields[0], '|');
    if (len_max == 0) len_max = id_fields.size();
    if (id_fields.size() != len_max || len_max < 2)
      throw DataError("inconsistent token row length in " + path);
    e.seq.ids.reserve(len_max);
    try {
      for (const auto& f : id_fields) e.seq.ids.push_back(std::stoi(f));
      for (size_t i = 0; i < kTabFeatureCount; ++i)
        e.x_tab.push_back(std::stod(fields[1 + i]));
      e.y = std::stod(fields[kTabFeatureCount + 1]);
    } catch (const std::exception&) {
      throw DataError("unparseable dataset row in " + path);
    }
    e.seq.mask.assign(len_max, 0);
    e.seq.n_tokens = len_max;
    for (size_t i = 0; i < len_max; ++i) {
      if (e.seq.ids[i] == Vocabulary::kPad) {
        e.seq.n_tokens = i;
        break;
      }
      e.seq.mask[i] = 1;
    }
    if (e.seq.n_tokens == 0) throw DataError("dataset row with no real tokens in " + path);
    if (!std::isfinite(e.y) || e.y < 0.0 || e.y > 1.0)
      throw DataError("dataset row with target outside [0, 1] in " + path);
    for (double v : e.x_tab)
      if (!std::isfinite(v)) throw DataError("dataset row with non-finite feature in " + path);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError("dataset file has no rows: " + path);
  return out;
}

}  // namespace crossfuse
