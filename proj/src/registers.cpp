#include "qrand/registers.hpp"

#include <fmt/format.h>

#include <set>
#include <stdexcept>

namespace qrand {

std::vector<Eigen::Index> strides_of(const std::vector<Register>& regs) {
  std::vector<Eigen::Index> strides(regs.size(), 1);
  for (size_t i = regs.size(); i-- > 1;) {
    strides[i - 1] = strides[i] * regs[i].dim;
  }
  return strides;
}

SubspaceIndex make_subspace_index(const std::vector<Register>& regs,
                                  const std::vector<size_t>& sel) {
  const auto strides = strides_of(regs);
  std::vector<bool> selected(regs.size(), false);
  for (size_t pos : sel) {
    if (pos >= regs.size()) {
      throw std::invalid_argument(
          fmt::format("subspace position {} out of range ({} registers)", pos, regs.size()));
    }
    if (selected[pos]) {
      throw std::invalid_argument(fmt::format("subspace position {} listed twice", pos));
    }
    selected[pos] = true;
  }

  SubspaceIndex out;
  out.sel_offsets.assign(1, 0);
  for (size_t pos : sel) {
    std::vector<Eigen::Index> next;
    next.reserve(out.sel_offsets.size() * regs[pos].dim);
    for (Eigen::Index base : out.sel_offsets) {
      for (Eigen::Index v = 0; v < regs[pos].dim; ++v) {
        next.push_back(base + v * strides[pos]);
      }
    }
    out.sel_offsets = std::move(next);
  }

  out.rest_offsets.assign(1, 0);
  for (size_t pos = 0; pos < regs.size(); ++pos) {
    if (selected[pos]) continue;
    std::vector<Eigen::Index> next;
    next.reserve(out.rest_offsets.size() * regs[pos].dim);
    for (Eigen::Index base : out.rest_offsets) {
      for (Eigen::Index v = 0; v < regs[pos].dim; ++v) {
        next.push_back(base + v * strides[pos]);
      }
    }
    out.rest_offsets = std::move(next);
  }
  return out;
}

void check_unique_labels(const std::vector<Register>& regs) {
  std::set<std::string> seen;
  for (const auto& r : regs) {
    if (r.dim < 1) {
      throw std::invalid_argument(fmt::format("register '{}' has dim {} < 1", r.label, r.dim));
    }
    if (!seen.insert(r.label).second) {
      throw std::invalid_argument(fmt::format("duplicate register label '{}'", r.label));
    }
  }
}

}  // namespace qrand
