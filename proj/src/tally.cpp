#include "mdiqkd/tally.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mdiqkd {

namespace {

int cell_index(int k, int l, Basis basis) {
    return (static_cast<int>(basis) * kNumIntensities + k) * kNumIntensities + l;
}

}  // namespace

SiftResult sift(const PulsePairOutcome& outcome) {
    SiftResult result;
    if (outcome.basis_alice != outcome.basis_bob) return result;

    const auto& c = outcome.clicks;
    const bool psi_minus_a = c[0] && c[3] && !c[1] && !c[2];  // D1@t0, D2@t1
    const bool psi_minus_b = c[1] && c[2] && !c[0] && !c[3];  // D1@t1, D2@t0
    if (!(psi_minus_a || psi_minus_b)) return result;

    result.accepted = true;
    // Bob flips his bit after a singlet announcement; agreement of the raw
    // bits is therefore a sifted-key error.
    result.error = outcome.bit_alice == outcome.bit_bob;
    return result;
}

TallyCell& TallyTable::cell(int k, int l, Basis basis) {
    return cells_[static_cast<size_t>(cell_index(k, l, basis))];
}

const TallyCell& TallyTable::cell(int k, int l, Basis basis) const {
    return cells_[static_cast<size_t>(cell_index(k, l, basis))];
}

void TallyTable::record(const PulsePairOutcome& outcome) {
    ++total_rounds_;
    if (outcome.basis_alice != outcome.basis_bob) {
        ++basis_mismatched_;
        return;
    }
    TallyCell& c = cell(outcome.intensity_index_alice, outcome.intensity_index_bob,
                        outcome.basis_alice);
    ++c.sent;
    const SiftResult s = sift(outcome);
    if (s.accepted) {
        ++c.accepted;
        if (s.error) ++c.errors;
    }
}

void TallyTable::merge(const TallyTable& other) {
    for (size_t i = 0; i < cells_.size(); ++i) {
        cells_[i].sent += other.cells_[i].sent;
        cells_[i].accepted += other.cells_[i].accepted;
        cells_[i].errors += other.cells_[i].errors;
    }
    total_rounds_ += other.total_rounds_;
    basis_mismatched_ += other.basis_mismatched_;
}

std::uint64_t TallyTable::matched_rounds() const { return total_rounds_ - basis_mismatched_; }

TallyTable tally_from_counts(std::array<TallyCell, 32> cells, std::uint64_t total) {
    TallyTable t;
    std::uint64_t matched = 0;
    for (int k = 0; k < kNumIntensities; ++k)
        for (int l = 0; l < kNumIntensities; ++l)
            for (Basis basis : {Basis::Z, Basis::X}) {
                const auto& src = cells[static_cast<size_t>(
                    (k * kNumIntensities + l) * 2 + (basis == Basis::Z ? 0 : 1))];
                if (src.accepted > src.sent || src.errors > src.accepted)
                    throw std::runtime_error("tally: counts violate errors <= accepted <= sent");
                t.cell(k, l, basis) = src;
                matched += src.sent;
            }
    if (total < matched) throw std::runtime_error("tally: total_rounds smaller than sum of sent");
    t.total_rounds_ = total;
    t.basis_mismatched_ = total - matched;
    return t;
}

CellRate cell_rate(const TallyCell& cell) {
    CellRate r;
    r.sent = cell.sent;
    r.accepted = cell.accepted;
    r.errors = cell.errors;
    if (cell.sent == 0) {
        r.empty = true;
        r.e_undefined = true;
        return r;
    }
    const double sent = static_cast<double>(cell.sent);
    r.q = static_cast<double>(cell.accepted) / sent;
    r.sigma_q = std::sqrt(r.q * (1.0 - r.q) / sent);
    if (cell.accepted == 0) {
        r.e_undefined = true;
    } else {
        const double acc = static_cast<double>(cell.accepted);
        r.e = static_cast<double>(cell.errors) / acc;
        r.sigma_e = std::sqrt(r.e * (1.0 - r.e) / acc);
    }
    return r;
}

RatesTable rates(const TallyTable& table, Basis basis) {
    RatesTable out;
    out.total_rounds = table.total_rounds();
    for (int k = 0; k < kNumIntensities; ++k)
        for (int l = 0; l < kNumIntensities; ++l) out.at(k, l) = cell_rate(table.cell(k, l, basis));
    return out;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string tally_to_csv(const TallyTable& table) {
    std::ostringstream out;
    out << "# total_rounds=" << table.total_rounds() << "\n";
    out << "k,l,basis,sent,accepted,errors,Q,E,sigma_Q,sigma_E\n";
    for (int k = 0; k < kNumIntensities; ++k)
        for (int l = 0; l < kNumIntensities; ++l)
            for (Basis basis : {Basis::Z, Basis::X}) {
                const CellRate r = cell_rate(table.cell(k, l, basis));
                out << k << ',' << l << ',' << to_string(basis) << ',' << r.sent << ','
                    << r.accepted << ',' << r.errors << ',' << fmt_double(r.q) << ','
                    << fmt_double(r.e) << ',' << fmt_double(r.sigma_q) << ','
                    << fmt_double(r.sigma_e) << "\n";
            }
    return out.str();
}

void write_tally_csv(const TallyTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("tally: cannot write '" + path + "'");
    out << tally_to_csv(table);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::uint64_t parse_count(const std::string& s, int row, const char* column) {
    try {
        size_t pos = 0;
        if (s.empty() || s[0] == '-') throw std::invalid_argument("negative");
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        std::ostringstream msg;
        msg << "tally csv row " << row << ": column '" << column << "' is not a count: '" << s
            << "'";
        throw std::runtime_error(msg.str());
    }
}

}  // namespace

TallyTable tally_from_csv(const std::string& text, std::uint64_t fallback_total_rounds) {
    std::istringstream in(text);
    std::string line;
    int row = 0;

    std::uint64_t total = fallback_total_rounds;
    bool have_total = false;
    std::array<TallyCell, 32> cells{};
    std::array<bool, 32> seen{};

    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            const auto pos = line.find("total_rounds=");
            if (pos != std::string::npos) {
                total = parse_count(line.substr(pos + 13), row, "total_rounds");
                have_total = true;
            }
            continue;
        }
        if (line.rfind("k,l,basis", 0) == 0) continue;  // header

        const auto fields = split_fields(line);
        if (fields.size() != 10) {
            std::ostringstream msg;
            msg << "tally csv row " << row << ": expected 10 columns, got " << fields.size();
            throw std::runtime_error(msg.str());
        }
        const auto k = parse_count(fields[0], row, "k");
        const auto l = parse_count(fields[1], row, "l");
        if (k >= kNumIntensities || l >= kNumIntensities) {
            std::ostringstream msg;
            msg << "tally csv row " << row << ": cell (" << k << "," << l << ") out of range";
            throw std::runtime_error(msg.str());
        }
        Basis basis;
        if (fields[2] == "Z")
            basis = Basis::Z;
        else if (fields[2] == "X")
            basis = Basis::X;
        else {
            std::ostringstream msg;
            msg << "tally csv row " << row << ": column 'basis' must be Z or X, got '" << fields[2]
                << "'";
            throw std::runtime_error(msg.str());
        }
        const size_t idx =
            (static_cast<size_t>(k) * kNumIntensities + static_cast<size_t>(l)) * 2 +
            (basis == Basis::Z ? 0 : 1);
        if (seen[idx]) {
            std::ostringstream msg;
            msg << "tally csv row " << row << ": duplicate cell (" << k << "," << l << ","
                << fields[2] << ")";
            throw std::runtime_error(msg.str());
        }
        seen[idx] = true;
        TallyCell& c = cells[idx];
        c.sent = parse_count(fields[3], row, "sent");
        c.accepted = parse_count(fields[4], row, "accepted");
        c.errors = parse_count(fields[5], row, "errors");
        if (c.accepted > c.sent || c.errors > c.accepted) {
            std::ostringstream msg;
            msg << "tally csv row " << row << ": counts violate errors <= accepted <= sent";
            throw std::runtime_error(msg.str());
        }
        // Columns 6..9 (Q, E, sigma_Q, sigma_E) are derived; recomputed from counts.
    }

    for (int k = 0; k < kNumIntensities; ++k)
        for (int l = 0; l < kNumIntensities; ++l)
            for (Basis basis : {Basis::Z, Basis::X})
                if (!seen[(static_cast<size_t>(k) * kNumIntensities + static_cast<size_t>(l)) * 2 +
                          (basis == Basis::Z ? 0 : 1)]) {
                    std::ostringstream msg;
                    msg << "tally csv: missing cell (" << k << "," << l << ","
                        << to_string(basis) << ")";
                    throw std::runtime_error(msg.str());
                }

    if (!have_total && fallback_total_rounds == 0)
        throw std::runtime_error(
            "tally csv: no '# total_rounds=' comment and no fallback total given");
    return tally_from_counts(cells, total);
}

TallyTable load_tally_csv(const std::string& path, std::uint64_t fallback_total_rounds) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("tally: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return tally_from_csv(buf.str(), fallback_total_rounds);
}

}  // namespace mdiqkd
