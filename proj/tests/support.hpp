#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dtmc/chain.hpp"
#include "dtmc/discretize.hpp"

// Fixture plumbing shared by the test binaries: scratch directories,
// small file helpers, and the reference chains most tests pin against.

namespace support {

/// Fresh scratch directory, removed when the object dies.
class TempDir {
  public:
    TempDir() {
        std::string tmpl =
            (std::filesystem::temp_directory_path() / "dtmc_test_XXXXXX").string();
        path_ = mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

  private:
    std::string path_;
};

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

/// Bidiagonal reference chain: survival 0.955/0.972/0.979/0.988
/// on the diagonal, the complement on the superdiagonal.
inline dtmc::TransitionMatrix reference_single_matrix() {
    return dtmc::TransitionMatrix::from_rows({{0.955, 0.045, 0.0, 0.0, 0.0},
                                              {0.0, 0.972, 0.028, 0.0, 0.0},
                                              {0.0, 0.0, 0.979, 0.021, 0.0},
                                              {0.0, 0.0, 0.0, 0.988, 0.012},
                                              {0.0, 0.0, 0.0, 0.0, 1.0}},
                                             dtmc::ChainTopology::single(5));
}

/// Upper-triangular reference chain.
inline dtmc::TransitionMatrix reference_multi_matrix() {
    return dtmc::TransitionMatrix::from_rows({{0.9571, 0.0347, 0.0074, 0.0006, 0.0002},
                                              {0.0, 0.9995, 0.0005, 0.0, 0.0},
                                              {0.0, 0.0, 0.9999, 0.0001, 0.0},
                                              {0.0, 0.0, 0.0, 0.9999, 0.0001},
                                              {0.0, 0.0, 0.0, 0.0, 1.0}},
                                             dtmc::ChainTopology::multi(5));
}

inline std::vector<double> pristine5() { return {1.0, 0.0, 0.0, 0.0, 0.0}; }

/// Table row built straight from field values; freqs = tallies / count.
inline dtmc::TableRow table_row(long count, int age_lo, int delta_t,
                                const std::vector<long>& tallies) {
    dtmc::TableRow row;
    row.count = count;
    row.age_lo = age_lo;
    row.age_hi = age_lo + delta_t;
    row.t = age_lo + delta_t / 2.0;
    row.step = age_lo / delta_t;
    for (const long tally : tallies) {
        row.freqs.push_back(static_cast<double>(tally) / static_cast<double>(count));
    }
    return row;
}

/// In-memory table from (step, freqs) pairs with uniform counts, so all
/// weights are exactly 1.
inline dtmc::DiscretizedTable table_from_freqs(
    const std::vector<std::pair<int, std::vector<double>>>& rows, int delta_t = 3) {
    dtmc::DiscretizedTable table;
    table.delta_t = delta_t;
    table.num_states = static_cast<int>(rows.front().second.size());
    for (const auto& [step, freqs] : rows) {
        dtmc::TableRow row;
        row.count = 100;
        row.age_lo = step * delta_t;
        row.age_hi = row.age_lo + delta_t;
        row.t = row.age_lo + delta_t / 2.0;
        row.step = step;
        row.freqs = freqs;
        table.rows.push_back(std::move(row));
        table.observations += 100;
    }
    return table;
}

}  // namespace support
