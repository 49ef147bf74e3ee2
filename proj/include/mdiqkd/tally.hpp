#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "mdiqkd/config.hpp"

namespace mdiqkd {

/// Result of basis-sift plus Bell-state post-selection for one round.
struct SiftResult {
    bool accepted = false;
    bool error = false;  // meaningful only when accepted
};

/// A valid partial-BSM announcement is a coincidence of exactly two clicks on
/// different detectors in different time bins: (D1,t0)&(D2,t1) or
/// (D1,t1)&(D2,t0). Both project onto the singlet, so the parties' sifted
/// bits are complementary; by convention Bob flips his bit, making an error
/// the case where the raw bits agree.
SiftResult sift(const PulsePairOutcome& outcome);

struct TallyCell {
    std::uint64_t sent = 0;
    std::uint64_t accepted = 0;
    std::uint64_t errors = 0;

    bool operator==(const TallyCell& other) const = default;
};

/// Per-(intensity pair, basis) counters for a run. Rounds whose bases
/// mismatch are dropped by the sift and tracked only via basis_mismatched,
/// so sum(sent) + basis_mismatched == total_rounds.
class TallyTable {
  public:
    TallyCell& cell(int k, int l, Basis basis);
    const TallyCell& cell(int k, int l, Basis basis) const;

    void record(const PulsePairOutcome& outcome);

    /// Elementwise sum; associative and commutative, so partial tables from
    /// parallel partitions can be merged in any order.
    void merge(const TallyTable& other);

    std::uint64_t total_rounds() const { return total_rounds_; }
    std::uint64_t basis_mismatched() const { return basis_mismatched_; }
    std::uint64_t matched_rounds() const;

    bool operator==(const TallyTable& other) const = default;

  private:
    std::array<TallyCell, kNumIntensities * kNumIntensities * 2> cells_{};
    std::uint64_t total_rounds_ = 0;
    std::uint64_t basis_mismatched_ = 0;

    friend TallyTable tally_from_counts(std::array<TallyCell, 32> cells, std::uint64_t total);
};

/// Rebuilds a table from raw per-cell counts (CSV import path). Cell order is
/// (k major, l, basis Z then X). total is the overall round count N.
TallyTable tally_from_counts(std::array<TallyCell, 32> cells, std::uint64_t total);

/// Gain/error-rate view of one cell. Values carry binomial (normal
/// approximation) standard deviations. A cell with no accepted events has
/// E defined as 0 and flagged; a cell with nothing sent is flagged empty.
struct CellRate {
    std::uint64_t sent = 0;
    std::uint64_t accepted = 0;
    std::uint64_t errors = 0;
    double q = 0.0;        // accepted / sent
    double e = 0.0;        // errors / accepted
    double sigma_q = 0.0;  // sqrt(Q(1-Q)/sent)
    double sigma_e = 0.0;  // sqrt(E(1-E)/accepted)
    bool empty = false;    // sent == 0
    bool e_undefined = false;  // accepted == 0
};

/// Rates for all 16 cells of one basis.
struct RatesTable {
    std::array<CellRate, kNumIntensities * kNumIntensities> cells{};
    std::uint64_t total_rounds = 0;

    const CellRate& at(int k, int l) const {
        return cells[static_cast<size_t>(k * kNumIntensities + l)];
    }
    CellRate& at(int k, int l) { return cells[static_cast<size_t>(k * kNumIntensities + l)]; }
};

CellRate cell_rate(const TallyCell& cell);
RatesTable rates(const TallyTable& table, Basis basis);

/// CSV with one row per (k, l, basis), columns
/// k,l,basis,sent,accepted,errors,Q,E,sigma_Q,sigma_E, preceded by a
/// "# total_rounds=N" comment so the overall round count survives export.
std::string tally_to_csv(const TallyTable& table);
void write_tally_csv(const TallyTable& table, const std::string& path);

/// Parses the CSV format above. Derived columns are recomputed from the
/// counts; malformed rows and missing/duplicate cells are reported with the
/// offending row or cell. If the total_rounds comment is absent,
/// fallback_total_rounds is used (pass 0 to require the comment).
TallyTable tally_from_csv(const std::string& text, std::uint64_t fallback_total_rounds = 0);
TallyTable load_tally_csv(const std::string& path, std::uint64_t fallback_total_rounds = 0);

}  // namespace mdiqkd
