#pragma once

#include <vector>

namespace ranklab {

struct ItemUniverse;

// One ordered list of items as shown to a (simulated) customer: distinct
// item ids into a universe, the scenario feature bg, and optional sampled
// labels (present on logged data, absent on freshly constructed orders).
struct Slate {
  std::vector<int> item_ids;
  std::vector<double> bg;
  std::vector<int> purchase_labels;  // empty or same length as item_ids
  std::vector<int> click_labels;     // empty or same length as item_ids

  int size() const { return static_cast<int>(item_ids.size()); }
  bool labeled() const { return !purchase_labels.empty(); }
};

// Throws DataError on out-of-range or duplicate ids or label-length
// mismatches.
void validate_slate(const Slate& slate, const ItemUniverse& universe);

}  // namespace ranklab
