#include "qprobe/basis.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace qprobe {

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;

}  // namespace

int ModeSpec::effective_cap(int particles) const {
  if (statistics != Statistics::Boson) return 1;
  if (max_occupancy == kUnbounded) return particles;
  return std::min(max_occupancy, particles);
}

void ModeSpec::validate() const {
  if (count < 1) throw std::invalid_argument("ModeSpec: count must be >= 1");
  if (statistics != Statistics::Boson && max_occupancy != kUnbounded && max_occupancy != 1)
    throw std::invalid_argument("ModeSpec: fermion/spin-1/2 modes require max_occupancy = 1");
  if (max_occupancy != kUnbounded && max_occupancy < 1)
    throw std::invalid_argument("ModeSpec: max_occupancy must be >= 1 or unbounded");
}

std::uint64_t sector_dimension(const ModeSpec& modes, int particles) {
  modes.validate();
  if (particles < 0) return 0;
  const int cap = modes.effective_cap(particles);
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(particles) + 1, 0);
  ways[0] = 1;
  for (int m = 0; m < modes.count; ++m) {
    std::vector<std::uint64_t> next(ways.size(), 0);
    for (int n = 0; n <= particles; ++n) {
      if (ways[static_cast<std::size_t>(n)] == 0) continue;
      for (int k = 0; k <= cap && n + k <= particles; ++k)
        next[static_cast<std::size_t>(n + k)] += ways[static_cast<std::size_t>(n)];
    }
    ways.swap(next);
  }
  return ways[static_cast<std::size_t>(particles)];
}

void Basis::finalize() {
  pack_shift_.assign(caps_.size() + 1, 0);
  int shift = 0;
  for (std::size_t m = 0; m < caps_.size(); ++m) {
    pack_shift_[m] = shift;
    shift += std::bit_width(static_cast<unsigned>(caps_[m]));
  }
  pack_shift_.back() = shift;
  if (shift > 64)
    throw std::invalid_argument("Basis: occupation vectors do not fit a 64-bit packed key");
  lookup_.reserve(states_.size() * 2);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    auto [it, inserted] = lookup_.emplace(pack(states_[i]), static_cast<std::int32_t>(i));
    if (!inserted) throw std::logic_error("Basis: duplicate state during enumeration");
  }
}

std::uint64_t Basis::pack(const Occupation& occ) const {
  std::uint64_t key = 0;
  for (std::size_t m = 0; m < occ.size(); ++m)
    key |= static_cast<std::uint64_t>(occ[m]) << pack_shift_[m];
  return key;
}

int Basis::index_of(const Occupation& occ) const {
  auto idx = try_index(occ);
  if (!idx) throw std::out_of_range("Basis: occupation vector not in this basis");
  return *idx;
}

std::optional<int> Basis::try_index(const Occupation& occ) const {
  if (occ.size() != caps_.size()) return std::nullopt;
  for (std::size_t m = 0; m < occ.size(); ++m)
    if (occ[m] > caps_[m]) return std::nullopt;
  auto it = lookup_.find(pack(occ));
  if (it == lookup_.end()) return std::nullopt;
  return static_cast<int>(it->second);
}

Occupation Basis::ancilla_part(int index) const {
  const Occupation& s = state(index);
  return Occupation(s.begin() + system_modes_, s.end());
}

namespace {

// Enumerates occupation vectors lexicographically descending. The first
// `system_modes` entries must sum to a value within [sys_lo, sys_hi]; the
// grand total must equal `total` when total >= 0 (total < 0 leaves the
// ancilla occupations unconstrained beyond their caps).
void enumerate(const std::vector<int>& caps, int system_modes, int sys_lo, int sys_hi, int total,
               std::vector<Occupation>& out) {
  const int modes = static_cast<int>(caps.size());
  std::vector<int> suffix_cap(static_cast<std::size_t>(modes) + 1, 0);
  for (int m = modes - 1; m >= 0; --m) suffix_cap[static_cast<std::size_t>(m)] = suffix_cap[static_cast<std::size_t>(m) + 1] + caps[static_cast<std::size_t>(m)];
  std::vector<int> sys_suffix_cap(static_cast<std::size_t>(system_modes) + 1, 0);
  for (int m = system_modes - 1; m >= 0; --m)
    sys_suffix_cap[static_cast<std::size_t>(m)] = sys_suffix_cap[static_cast<std::size_t>(m) + 1] + caps[static_cast<std::size_t>(m)];

  Occupation occ(static_cast<std::size_t>(modes), 0);
  auto rec = [&](auto&& self, int m, int sys_sum, int sum) -> void {
    if (m == modes) {
      if (total >= 0 && sum != total) return;
      out.push_back(occ);
      return;
    }
    if (m < system_modes) {
      // Prune if the system-sum window can no longer be reached.
      if (sys_sum > sys_hi) return;
      if (sys_sum + sys_suffix_cap[static_cast<std::size_t>(m)] < sys_lo) return;
    } else if (m == system_modes) {
      if (sys_sum < sys_lo || sys_sum > sys_hi) return;
    }
    if (total >= 0) {
      if (sum > total) return;
      if (sum + suffix_cap[static_cast<std::size_t>(m)] < total) return;
    }
    for (int n = caps[static_cast<std::size_t>(m)]; n >= 0; --n) {
      occ[static_cast<std::size_t>(m)] = static_cast<std::uint8_t>(n);
      self(self, m + 1, m < system_modes ? sys_sum + n : sys_sum, sum + n);
    }
    occ[static_cast<std::size_t>(m)] = 0;
  };
  rec(rec, 0, 0, 0);
}

}  // namespace

Basis Basis::sector(const ModeSpec& modes, int particles) {
  modes.validate();
  if (particles < 0) throw std::invalid_argument("Basis::sector: negative particle number");
  const int cap = modes.effective_cap(std::max(particles, 1));
  if (static_cast<long long>(cap) * modes.count < particles)
    throw std::invalid_argument("Basis::sector: sector is empty (N exceeds mode capacity)");

  Basis b;
  b.caps_.assign(static_cast<std::size_t>(modes.count), cap);
  b.fermionic_.assign(static_cast<std::size_t>(modes.count), modes.statistics == Statistics::Fermion);
  b.statistics_ = modes.statistics;
  b.system_modes_ = modes.count;
  b.particles_ = particles;
  enumerate(b.caps_, modes.count, particles, particles, particles, b.states_);
  if (b.states_.empty()) throw std::invalid_argument("Basis::sector: sector is empty");

  std::uint64_t h = fnv1a(kFnvOffset, 0x5ec7u);
  h = fnv1a(h, static_cast<std::uint64_t>(modes.count));
  h = fnv1a(h, static_cast<std::uint64_t>(modes.statistics));
  h = fnv1a(h, static_cast<std::uint64_t>(cap));
  h = fnv1a(h, static_cast<std::uint64_t>(particles));
  b.tag_ = h;
  b.finalize();
  return b;
}

Basis Basis::sector_union(const ModeSpec& modes, const std::vector<int>& particle_numbers) {
  modes.validate();
  if (particle_numbers.empty()) throw std::invalid_argument("Basis::sector_union: no sectors given");
  int max_n = 0;
  for (int n : particle_numbers) max_n = std::max(max_n, n);
  const int cap = modes.effective_cap(std::max(max_n, 1));

  Basis b;
  b.caps_.assign(static_cast<std::size_t>(modes.count), cap);
  b.fermionic_.assign(static_cast<std::size_t>(modes.count), modes.statistics == Statistics::Fermion);
  b.statistics_ = modes.statistics;
  b.system_modes_ = modes.count;
  b.particles_ = max_n;

  std::uint64_t h = fnv1a(kFnvOffset, 0x0413u);
  h = fnv1a(h, static_cast<std::uint64_t>(modes.count));
  h = fnv1a(h, static_cast<std::uint64_t>(modes.statistics));
  h = fnv1a(h, static_cast<std::uint64_t>(cap));
  for (int n : particle_numbers) {
    if (n < 0 || static_cast<long long>(cap) * modes.count < n)
      continue;  // infeasible sectors contribute no states
    enumerate(b.caps_, modes.count, n, n, n, b.states_);
    h = fnv1a(h, static_cast<std::uint64_t>(n));
  }
  if (b.states_.empty()) throw std::invalid_argument("Basis::sector_union: all sectors are empty");
  b.tag_ = h;
  b.finalize();
  return b;
}

Basis Basis::compose_with_ancillas(const Basis& system, const std::vector<AncillaSpec>& ancillas,
                                   bool conserve_total) {
  Basis b;
  b.caps_ = system.caps_;
  b.fermionic_ = system.fermionic_;
  int trunc_total = 0;
  for (const auto& a : ancillas) {
    if (a.truncation < 1) throw std::invalid_argument("compose_with_ancillas: truncation must be >= 1");
    b.caps_.push_back(a.truncation);
    b.fermionic_.push_back(a.statistics == Statistics::Fermion);
    if (a.statistics != Statistics::Boson && a.truncation != 1)
      throw std::invalid_argument("compose_with_ancillas: fermionic ancilla truncation must be 1");
    trunc_total += a.truncation;
  }
  b.statistics_ = system.statistics_;
  b.system_modes_ = system.mode_count();
  b.particles_ = system.particles();

  const int n = system.particles();
  int sys_capacity = 0;
  for (int m = 0; m < system.mode_count(); ++m) sys_capacity += system.cap(m);
  if (conserve_total) {
    enumerate(b.caps_, b.system_modes_, std::max(0, n - trunc_total), n, n, b.states_);
  } else {
    const int lo = std::max(0, n - trunc_total);
    const int hi = std::min(sys_capacity, n + trunc_total);
    enumerate(b.caps_, b.system_modes_, lo, hi, -1, b.states_);
  }
  if (b.states_.empty()) throw std::invalid_argument("compose_with_ancillas: empty composite sector");

  std::uint64_t h = fnv1a(system.tag(), conserve_total ? 0xc0113u : 0xf7eeu);
  for (const auto& a : ancillas) {
    h = fnv1a(h, static_cast<std::uint64_t>(a.statistics));
    h = fnv1a(h, static_cast<std::uint64_t>(a.truncation));
  }
  b.tag_ = h;
  b.finalize();
  return b;
}

}  // namespace qprobe
