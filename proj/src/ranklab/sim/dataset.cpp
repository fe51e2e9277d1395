#include "ranklab/sim/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ranklab/core/checkpoint.hpp"
#include "ranklab/core/error.hpp"
#include "ranklab/core/parallel.hpp"
#include "ranklab/core/rng.hpp"

namespace ranklab {

std::vector<double> constant_bg(int bg_dim) {
  return std::vector<double>(static_cast<size_t>(bg_dim), 0.25);
}

std::pair<Dataset, Dataset> generate_dataset(const ItemUniverse& universe,
                                             const GroundTruthRule& rule,
                                             const GenerateOptions& opts,
                                             uint64_t seed) {
  if (opts.num_lists < 0) throw ConfigError("num_lists must be non-negative");
  if (opts.num_lists > 0 && opts.list_length <= 0)
    throw ConfigError("list_length must be positive");
  if (opts.list_length > universe.num_items)
    throw ConfigError("list_length " + std::to_string(opts.list_length) +
                      " exceeds universe size " +
                      std::to_string(universe.num_items));
  if (opts.train_fraction < 0.0 || opts.train_fraction > 1.0)
    throw ConfigError("train_fraction must lie in [0,1]");
  if (opts.list_length > rule.positions())
    throw ConfigError("list_length exceeds the rule's alpha schedule");

  std::vector<Slate> all(static_cast<size_t>(opts.num_lists));
  const std::vector<double> bg = constant_bg(opts.bg_dim);
  // One derived RNG stream per list: results do not depend on the thread
  // count or on how many draws other lists consume.
  parallel_for(opts.num_lists, [&](int64_t i) {
    Rng rng(mix_seed(mix_seed(seed, "gen-data"), static_cast<uint64_t>(i)));
    Slate& s = all[static_cast<size_t>(i)];
    s.item_ids = sample_distinct(universe.num_items, opts.list_length, rng);
    s.bg = bg;
    SampledLabels labels = sample_labels(rule, universe, s, rng);
    s.purchase_labels = std::move(labels.purchase);
    s.click_labels = std::move(labels.click);
  });

  auto stamp = [&](Dataset& d, const char* split) {
    d.split = split;
    d.universe_seed = universe.seed;
    d.rule_seed = rule.seed;
    d.generation_seed = seed;
    d.list_length = opts.list_length;
    d.num_items = universe.num_items;
    d.feature_dim = universe.feature_dim;
    d.bg_dim = opts.bg_dim;
  };

  int train_count = static_cast<int>(
      std::llround(opts.train_fraction * static_cast<double>(opts.num_lists)));
  Dataset train, test;
  stamp(train, "train");
  stamp(test, "test");
  train.slates.assign(all.begin(), all.begin() + train_count);
  test.slates.assign(all.begin() + train_count, all.end());
  return {std::move(train), std::move(test)};
}

std::vector<double> position_profile(const Dataset& dataset,
                                     const GroundTruthRule& rule,
                                     const ItemUniverse& universe) {
  if (dataset.slates.empty())
    throw DataError("position_profile of an empty dataset");
  RuleScorer scorer(rule, universe);
  const int n = dataset.list_length;
  std::vector<double> sums(static_cast<size_t>(n), 0.0);
  for (const Slate& s : dataset.slates) {
    ScoredList scored = scorer.score(s.item_ids);
    for (int i = 0; i < s.size(); ++i) sums[static_cast<size_t>(i)] += scored.f[static_cast<size_t>(i)];
  }
  for (double& v : sums) v /= static_cast<double>(dataset.size());
  return sums;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "ranklab-dataset 1 split " << dataset.split << " universe_seed "
      << dataset.universe_seed << " rule_seed " << dataset.rule_seed
      << " generation_seed " << dataset.generation_seed << " N "
      << dataset.list_length << " M " << dataset.num_items << " d "
      << dataset.feature_dim << " bg_dim " << dataset.bg_dim << " lists "
      << dataset.slates.size() << '\n';
  for (size_t i = 0; i < dataset.slates.size(); ++i) {
    const Slate& s = dataset.slates[i];
    out << i << " |";
    for (int id : s.item_ids) out << ' ' << id;
    out << " |";
    for (int y : s.purchase_labels) out << ' ' << y;
    out << " |";
    for (int y : s.click_labels) out << ' ' << y;
    out << " |";
    for (double v : s.bg) out << ' ' << format_double(v);
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("failed writing dataset '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  auto fail = [&](const std::string& what) -> IoError {
    return IoError("malformed dataset '" + path + "': " + what);
  };

  std::string header;
  if (!std::getline(in, header)) throw fail("missing header");
  Dataset d;
  size_t lists = 0;
  {
    std::istringstream hs(header);
    std::string magic, key;
    int version = 0;
    if (!(hs >> magic >> version) || magic != "ranklab-dataset" || version != 1)
      throw fail("bad header magic");
    while (hs >> key) {
      if (key == "split") hs >> d.split;
      else if (key == "universe_seed") hs >> d.universe_seed;
      else if (key == "rule_seed") hs >> d.rule_seed;
      else if (key == "generation_seed") hs >> d.generation_seed;
      else if (key == "N") hs >> d.list_length;
      else if (key == "M") hs >> d.num_items;
      else if (key == "d") hs >> d.feature_dim;
      else if (key == "bg_dim") hs >> d.bg_dim;
      else if (key == "lists") hs >> lists;
      else throw fail("unknown header key '" + key + "'");
      if (!hs && !hs.eof()) throw fail("bad value for header key '" + key + "'");
    }
  }

  d.slates.reserve(lists);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    size_t list_id = 0;
    std::string tok;
    if (!(ls >> list_id >> tok) || tok != "|") throw fail("bad record start");
    Slate s;
    auto read_section = [&](auto& vec, auto parse) {
      while (ls >> tok) {
        if (tok == "|") return true;
        vec.push_back(parse(tok));
      }
      return false;  // ran out before the next separator
    };
    auto to_int = [&](const std::string& t) {
      return std::stoi(t);
    };
    auto to_double = [&](const std::string& t) {
      char* end = nullptr;
      double v = std::strtod(t.c_str(), &end);
      if (end == t.c_str() || *end != '\0') throw fail("bad bg value '" + t + "'");
      return v;
    };
    if (!read_section(s.item_ids, to_int)) throw fail("record missing labels");
    if (!read_section(s.purchase_labels, to_int)) throw fail("record missing click labels");
    if (!read_section(s.click_labels, to_int)) throw fail("record missing bg");
    while (ls >> tok) s.bg.push_back(to_double(tok));
    d.slates.push_back(std::move(s));
  }
  if (d.slates.size() != lists)
    throw fail("header promises " + std::to_string(lists) + " lists, found " +
               std::to_string(d.slates.size()));
  return d;
}

}  // namespace ranklab
