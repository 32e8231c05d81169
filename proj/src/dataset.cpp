#include "ddn/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ddn {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(xs[i]);
  }
  return s;
}

std::string join_reals(const Vec& xs) {
  std::string s;
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += fmt_double(xs(i));
  }
  return s;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

Vec parse_reals(const std::string& s) {
  std::vector<double> out;
  if (!s.empty()) {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  }
  Vec v(static_cast<Eigen::Index>(out.size()));
  for (size_t i = 0; i < out.size(); ++i) v(static_cast<Eigen::Index>(i)) = out[i];
  return v;
}

}  // namespace

PoolBuildResult build_pool(std::span<const PoolRecord> records) {
  PoolBuildResult out;
  out.samples.reserve(records.size());
  for (const auto& rec : records) {
    if (rec.r < 1) {
      ++out.dropped_zero_impression;
      continue;
    }
    Sample s;
    s.target_id = rec.target_id;
    s.target = rec.target;
    s.context = rec.context;
    s.r = rec.r;
    s.clicks = rec.clicks;
    s.calibration_baseline = rec.calibration_baseline;
    s.day = rec.day;
    s.y_clean = rec.y_clean;
    s.y = empirical_log_ctr({rec.r, rec.clicks}, rec.calibration_baseline);
    out.samples.push_back(std::move(s));
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_pool(std::span<const Sample> pool,
                                                               double validation_fraction,
                                                               uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation fraction must lie in (0,1)");
  std::vector<Sample> train, val;
  for (const auto& s : pool) {
    double u = hash_u01(mix_seed({seed, static_cast<uint64_t>(s.target_id), 0x5B117ull}));
    (u < validation_fraction ? val : train).push_back(s);
  }
  if (train.empty() || val.empty())
    throw ConfigError("split produced an empty side; adjust the validation fraction");
  return {std::move(train), std::move(val)};
}

void save_dataset(const std::filesystem::path& path, std::span<const Sample> samples,
                  const DatasetManifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write dataset file " + path.string());
  for (const auto& s : samples) {
    f << "v=1"
      << " tid=" << s.target_id << " day=" << s.day << " r=" << s.r << " clicks=" << s.clicks
      << " base=" << fmt_double(s.calibration_baseline) << " y=" << fmt_double(s.y)
      << " ytrue=" << (s.has_clean_label() ? fmt_double(s.y_clean) : std::string("na"))
      << " tok=" << join_ints(s.target.token_ids)
      << " tcat=" << join_ints(s.target.categorical_ids)
      << " treal=" << join_reals(s.target.content_reals)
      << " ccat=" << join_ints(s.context.context_ids)
      << " creal=" << join_reals(s.context.context_reals) << "\n";
  }
  if (!f) throw DataError("dataset write failed: " + path.string());

  json m;
  m["schema_version"] = manifest.schema_version;
  m["records"] = static_cast<long>(samples.size());
  m["token_vocab"] = manifest.token_vocab;
  m["target_cat_vocabs"] = manifest.target_cat_vocabs;
  m["context_cat_vocabs"] = manifest.context_cat_vocabs;
  m["target_real_dim"] = manifest.target_real_dim;
  m["context_real_dim"] = manifest.context_real_dim;
  m["split_seed"] = manifest.split_seed;
  m["day_min"] = manifest.day_min;
  m["day_max"] = manifest.day_max;
  m["calibration_baselines"] = manifest.calibration_baselines;
  std::ofstream mf(path.string() + ".manifest.json", std::ios::trunc);
  mf << m.dump(2) << "\n";
  if (!mf) throw DataError("manifest write failed: " + path.string());
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open dataset file " + path.string());
  LoadedDataset out;
  std::string line;
  long line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    Sample s;
    std::stringstream ss(line);
    std::string kv;
    bool versioned = false;
    while (ss >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw DataError("malformed dataset line " + std::to_string(line_no));
      std::string key = kv.substr(0, eq);
      std::string val = kv.substr(eq + 1);
      if (key == "v") {
        if (val != "1") throw DataError("unsupported dataset record version " + val);
        versioned = true;
      } else if (key == "tid") s.target_id = std::stoi(val);
      else if (key == "day") s.day = std::stoi(val);
      else if (key == "r") s.r = std::stoll(val);
      else if (key == "clicks") s.clicks = std::stoll(val);
      else if (key == "base") s.calibration_baseline = std::stod(val);
      else if (key == "y") s.y = std::stod(val);
      else if (key == "ytrue")
        s.y_clean = val == "na" ? std::numeric_limits<double>::quiet_NaN() : std::stod(val);
      else if (key == "tok") s.target.token_ids = parse_ints(val);
      else if (key == "tcat") s.target.categorical_ids = parse_ints(val);
      else if (key == "treal") s.target.content_reals = parse_reals(val);
      else if (key == "ccat") s.context.context_ids = parse_ints(val);
      else if (key == "creal") s.context.context_reals = parse_reals(val);
      else
        throw DataError("unknown dataset key '" + key + "' at line " + std::to_string(line_no));
    }
    if (!versioned) throw DataError("missing record version at line " + std::to_string(line_no));
    out.samples.push_back(std::move(s));
  }

  std::ifstream mf(path.string() + ".manifest.json");
  if (mf) {
    json m = json::parse(mf);
    out.manifest.schema_version = m.at("schema_version").get<int>();
    out.manifest.records = m.at("records").get<long>();
    out.manifest.token_vocab = m.at("token_vocab").get<int>();
    out.manifest.target_cat_vocabs = m.at("target_cat_vocabs").get<std::vector<int>>();
    out.manifest.context_cat_vocabs = m.at("context_cat_vocabs").get<std::vector<int>>();
    out.manifest.target_real_dim = m.at("target_real_dim").get<int>();
    out.manifest.context_real_dim = m.at("context_real_dim").get<int>();
    out.manifest.split_seed = m.at("split_seed").get<uint64_t>();
    out.manifest.day_min = m.at("day_min").get<int>();
    out.manifest.day_max = m.at("day_max").get<int>();
    out.manifest.calibration_baselines = m.at("calibration_baselines").get<std::vector<double>>();
    if (out.manifest.records != static_cast<long>(out.samples.size()))
      throw DataError("manifest record count does not match dataset contents");
  } else {
    out.manifest.records = static_cast<long>(out.samples.size());
  }
  return out;
}

}  // namespace ddn
