#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace qprobe {

enum class Statistics { Boson, Fermion, SpinHalf };

/// Mode layout of a local Hilbert space. For fermions and spin-1/2 the
/// per-mode occupancy cap is forced to 1.
struct ModeSpec {
  static constexpr int kUnbounded = -1;

  int count = 0;
  Statistics statistics = Statistics::Boson;
  int max_occupancy = kUnbounded;

  int effective_cap(int particles) const;
  void validate() const;
};

struct AncillaSpec {
  Statistics statistics = Statistics::Boson;
  int truncation = 2;
};

using Occupation = std::vector<std::uint8_t>;

/// Enumerated occupation-number basis. States are ordered lexicographically
/// descending on the occupation vector; index_of is the exact inverse of
/// positional indexing. Immutable after construction.
class Basis {
 public:
  // Empty placeholder; real instances come from the factories below.
  Basis() = default;

  // Fixed-particle-number sector of a homogeneous set of modes.
  static Basis sector(const ModeSpec& modes, int particles);

  // Union of several fixed-N sectors of the same modes (for operators that
  // change the particle number). Sectors are concatenated in the given order.
  static Basis sector_union(const ModeSpec& modes, const std::vector<int>& particle_numbers);

  // System sector joined with ancillary modes. With conserve_total, only
  // composite states with N_system + sum(n_ancilla) == N are enumerated.
  // Otherwise every ancilla occupation up to its truncation is allowed and
  // the system part may range over the sectors reachable by exchanging up to
  // sum(truncations) excitations with the ancillas.
  static Basis compose_with_ancillas(const Basis& system, const std::vector<AncillaSpec>& ancillas,
                                     bool conserve_total);

  int dimension() const { return static_cast<int>(states_.size()); }
  int mode_count() const { return static_cast<int>(caps_.size()); }
  int system_mode_count() const { return system_modes_; }
  int ancilla_count() const { return mode_count() - system_modes_; }
  int particles() const { return particles_; }

  const Occupation& state(int index) const { return states_[static_cast<std::size_t>(index)]; }
  const std::vector<Occupation>& states() const { return states_; }

  int index_of(const Occupation& occ) const;
  std::optional<int> try_index(const Occupation& occ) const;

  int cap(int mode) const { return caps_[static_cast<std::size_t>(mode)]; }
  bool fermionic(int mode) const { return fermionic_[static_cast<std::size_t>(mode)]; }
  Statistics system_statistics() const { return statistics_; }

  // Structural tag: equal for identically constructed bases; used to check
  // operator/state compatibility.
  std::uint64_t tag() const { return tag_; }

  Occupation ancilla_part(int index) const;

 private:
  void finalize();
  std::uint64_t pack(const Occupation& occ) const;

  std::vector<Occupation> states_;
  std::unordered_map<std::uint64_t, std::int32_t> lookup_;
  std::vector<int> caps_;
  std::vector<bool> fermionic_;
  std::vector<int> pack_shift_;
  Statistics statistics_ = Statistics::Boson;
  int system_modes_ = 0;
  int particles_ = 0;
  std::uint64_t tag_ = 0;
};

// Dimension of a fixed-N sector computed by direct combinatorics, without
// enumerating states (stars-and-bars / binomial / capped recursion).
std::uint64_t sector_dimension(const ModeSpec& modes, int particles);

}  // namespace qprobe
