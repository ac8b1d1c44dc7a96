#pragma once
#include <chrono>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fedpipe {

inline std::int64_t now_us() {
    using namespace std::chrono;
    return duration_cast<microseconds>(steady_clock::now().time_since_epoch()).count();
}

// Server-side timing decomposition and loss statistics for one round.
// receive = first START to last END, compute = last END to division done,
// send = division done to last client END_ACK. overlapped_add_us is the
// worker time spent adding before the last END arrived, i.e. the part of
// the computation hidden inside the receive phase.
struct RoundReport {
    int round = 0;
    bool aborted = false;
    std::string abort_reason;

    std::int64_t t_first_start_us = -1;  // relative to round start
    std::int64_t t_all_ends_us = -1;
    std::int64_t t_divide_done_us = -1;
    std::int64_t t_send_done_us = -1;

    std::int64_t receive_us = 0;
    std::int64_t compute_us = 0;
    std::int64_t send_us = 0;
    std::int64_t overlapped_add_us = 0;

    std::uint64_t packets_received = 0;
    std::uint64_t malformed = 0;
    std::uint64_t ring_drops = 0;
    std::uint64_t late_drops = 0;
    std::uint64_t unknown_source_drops = 0;
    std::uint64_t stray_control = 0;
    std::uint64_t barrier_violations = 0;

    std::vector<std::uint32_t> client_chunks_received;  // per client
    std::vector<std::uint16_t> contrib_counts;          // per chunk

    // Percentage of expected (client x chunk) contributions that were missing.
    double loss_pct(unsigned n_clients) const {
        if (contrib_counts.empty() || n_clients == 0) return 0.0;
        double got = 0;
        for (auto c : contrib_counts) got += c;
        const double expected = static_cast<double>(contrib_counts.size()) * n_clients;
        return 100.0 * (1.0 - got / expected);
    }
};

inline constexpr std::string_view kMetricsCsvHeader =
    "run,round,response_time_us,receive_time_us,compute_time_us,send_time_us,"
    "loss_pct,test_loss,test_accuracy";

struct MetricsRow {
    int run = 0;
    int round = 0;
    std::optional<std::int64_t> response_time_us;
    std::optional<std::int64_t> receive_time_us;
    std::optional<std::int64_t> compute_time_us;
    std::optional<std::int64_t> send_time_us;
    std::optional<double> loss_pct;
    std::optional<double> test_loss;
    std::optional<double> test_accuracy;

    std::string to_csv() const {
        std::ostringstream os;
        os << run << ',' << round << ',';
        auto put = [&os](const auto& field, bool comma) {
            if (field) os << *field;
            if (comma) os << ',';
        };
        put(response_time_us, true);
        put(receive_time_us, true);
        put(compute_time_us, true);
        put(send_time_us, true);
        put(loss_pct, true);
        put(test_loss, true);
        put(test_accuracy, false);
        return os.str();
    }
};

class MetricsCsvWriter {
public:
    MetricsCsvWriter() = default;

    explicit MetricsCsvWriter(const std::string& path) {
        if (path.empty()) return;
        out_.open(path, std::ios::trunc);
        if (!out_) throw std::runtime_error("cannot open csv file " + path);
        out_ << kMetricsCsvHeader << '\n';
    }

    bool open() const { return out_.is_open(); }

    void append(const MetricsRow& row) {
        if (!out_.is_open()) return;
        out_ << row.to_csv() << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

}  // namespace fedpipe
