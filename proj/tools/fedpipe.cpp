// fedpipe command line: `server` runs the aggregation server (UDP pipeline
// or TCP baseline), `client` runs a training or payload-only client, `bench`
// orchestrates server+client processes over a config matrix and aggregates
// CSV results. Exit codes: 0 ok, 1 usage error, 2 runtime failure.
#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedpipe/fedpipe.hpp"

namespace fs = std::filesystem;
using namespace fedpipe;

namespace {

struct CommonNetArgs {
    std::string transport = "udp";
    std::string mode = "exact";
    double loss_rate = 0.0;
    std::uint64_t loss_seed = 1;
    std::string loss_dir = "both";
};

LossDirection parse_dir(const std::string& s) {
    if (s == "outbound") return LossDirection::Outbound;
    if (s == "inbound") return LossDirection::Inbound;
    return LossDirection::Both;
}

AggMode parse_mode(const std::string& s) {
    return s == "approx" ? AggMode::Approximate : AggMode::Exact;
}

struct ServerArgs {
    CommonNetArgs net;
    unsigned clients = 1;
    unsigned workers = 1;
    std::size_t params = 367;
    std::size_t chunk_capacity = kChunkCapacity;
    std::string bind = "127.0.0.1:0";
    int rounds = 1;
    std::string csv;
    std::vector<std::uint16_t> client_ports;
    unsigned end_ack_window_ms = 1000;
    unsigned retransmit_ms = 100;
    unsigned deadline_ms = 30000;
    std::size_t ring_capacity = 1024;
    int run_id = 0;
    bool quiet = false;
};

int run_server(const ServerArgs& a) {
    MetricsCsvWriter csv(a.csv);
    const ChunkLayout layout(a.params, a.chunk_capacity);

    auto emit = [&](const RoundReport& rep, unsigned n_clients) {
        MetricsRow row;
        row.run = a.run_id;
        row.round = rep.round;
        row.receive_time_us = rep.receive_us;
        row.compute_time_us = rep.compute_us;
        row.send_time_us = rep.send_us;
        row.loss_pct = rep.loss_pct(n_clients);
        csv.append(row);
        if (!a.quiet) {
            std::cout << "round " << rep.round << (rep.aborted ? " ABORTED " : " ok ")
                      << "recv_us=" << rep.receive_us << " compute_us=" << rep.compute_us
                      << " send_us=" << rep.send_us << " loss_pct=" << rep.loss_pct(n_clients)
                      << " overlap_us=" << rep.overlapped_add_us;
            if (rep.aborted) std::cout << " reason=\"" << rep.abort_reason << "\"";
            std::cout << std::endl;
        }
    };

    if (a.net.transport == "tcp") {
        TcpServerConfig cfg;
        cfg.n_clients = a.clients;
        cfg.layout = layout;
        cfg.mode = parse_mode(a.net.mode);
        cfg.bind = Endpoint::parse(a.bind);
        cfg.round_deadline = std::chrono::milliseconds(a.deadline_ms);
        TcpBaselineServer server(cfg);
        std::cout << "listening on " << server.local_endpoint().to_string() << std::endl;
        for (int r = 0; r < a.rounds; ++r) {
            const RoundResult result = server.run_round(r);
            emit(result.report, a.clients);
            if (result.report.aborted) return 2;
        }
        return 0;
    }

    ServerConfig cfg;
    cfg.n_clients = a.clients;
    cfg.n_workers = a.workers;
    cfg.layout = layout;
    cfg.mode = parse_mode(a.net.mode);
    cfg.bind = Endpoint::parse(a.bind);
    cfg.client_ports = a.client_ports;
    cfg.end_ack_window = std::chrono::milliseconds(a.end_ack_window_ms);
    cfg.retransmit_period = std::chrono::milliseconds(a.retransmit_ms);
    cfg.round_deadline = std::chrono::milliseconds(a.deadline_ms);
    cfg.ring_capacity = a.ring_capacity;
    cfg.loss = LossPolicy{a.net.loss_rate, a.net.loss_seed, parse_dir(a.net.loss_dir)};
    PipelineServer server(cfg);
    std::cout << "listening on " << server.local_endpoint().to_string() << std::endl;
    for (int r = 0; r < a.rounds; ++r) {
        const RoundResult result = server.run_round(r);
        emit(result.report, a.clients);
        if (result.report.aborted) return 2;
    }
    return 0;
}

struct ClientArgs {
    CommonNetArgs net;
    unsigned id = 0;
    std::string server = "127.0.0.1:9000";
    int rounds = 1;
    bool payload_only = false;
    std::size_t params = 2'000'000;  // payload-only vector size
    std::size_t chunk_capacity = kChunkCapacity;
    unsigned epochs = 1;
    unsigned batch = 50;
    float eta = 0.1f;
    std::uint64_t seed = 1;
    unsigned dim = 32;
    unsigned classes = 10;
    std::size_t train_samples = 10'000;
    std::size_t test_samples = 2'000;
    unsigned n_clients = 10;  // sharding denominator
    std::uint16_t source_port = 0;
    unsigned retransmit_ms = 100;
    unsigned deadline_ms = 30000;
    unsigned send_burst = 32;
    unsigned send_interval_us = 500;
    std::string csv;
    int run_id = 0;
    bool quiet = false;
};

int run_client(const ClientArgs& a) {
    MetricsCsvWriter csv(a.csv);
    const Endpoint server = Endpoint::parse(a.server);

    const ModelShape shape{a.dim, a.classes};
    const std::size_t P = a.payload_only ? a.params : shape.param_count();
    const ChunkLayout layout(P, a.chunk_capacity);

    SyntheticData data;
    Dataset shard;
    std::vector<float> w;
    if (a.payload_only) {
        SplitMix64 rng(derive_seed(a.seed, 0xb0d7 + a.id));
        w.resize(P);
        for (auto& x : w) x = static_cast<float>(rng.next_unit() * 2.0 - 1.0);
    } else {
        data = gen_synthetic(a.seed, a.train_samples, a.test_samples, a.dim, a.classes,
                             a.n_clients);
        shard = data.shard(a.id);
        w.assign(P, 0.0f);
    }

    if (a.net.transport == "tcp") {
        for (int r = 0; r < a.rounds; ++r) {
            if (!a.payload_only) {
                HyperParams hp{a.epochs, a.batch, a.eta, 1,
                               derive_seed(a.seed, r * a.n_clients + a.id)};
                w = client_update(w, shard, shape, hp);
            }
            const std::int64_t t0 = now_us();
            auto reply = tcp_client_round(server, w, std::chrono::milliseconds(a.deadline_ms));
            if (!reply) {
                std::cerr << "client " << a.id << ": tcp round " << r << " failed" << std::endl;
                return 2;
            }
            w = std::move(*reply);
            MetricsRow row;
            row.run = a.run_id;
            row.round = r;
            row.response_time_us = now_us() - t0;
            row.loss_pct = 0.0;
            if (!a.payload_only) {
                const EvalResult eval = evaluate(w, shape, data.test);
                row.test_loss = eval.loss;
                row.test_accuracy = eval.accuracy;
            }
            csv.append(row);
            if (!a.quiet)
                std::cout << "round " << r << " response_us=" << *row.response_time_us
                          << (row.test_loss ? " loss=" + std::to_string(*row.test_loss) : "")
                          << std::endl;
        }
        return 0;
    }

    ClientConfig cfg;
    cfg.id = a.id;
    cfg.server = server;
    cfg.source_port = a.source_port;
    cfg.layout = layout;
    cfg.loss = LossPolicy{a.net.loss_rate, a.net.loss_seed + a.id, parse_dir(a.net.loss_dir)};
    cfg.retransmit_period = std::chrono::milliseconds(a.retransmit_ms);
    cfg.deadline = std::chrono::milliseconds(a.deadline_ms);
    cfg.send_burst = a.send_burst;
    cfg.send_interval = std::chrono::microseconds(a.send_interval_us);
    ClientSession session(cfg);

    for (int r = 0; r < a.rounds; ++r) {
        if (!a.payload_only) {
            HyperParams hp{a.epochs, a.batch, a.eta, 1,
                           derive_seed(a.seed, r * a.n_clients + a.id)};
            w = client_update(w, shard, shape, hp);
        }
        session.reset();
        try {
            const SendStats sent = session.send_locals(w);
            const ReceiveStats recv = session.receive_globals(w);
            w = recv.merged;
            MetricsRow row;
            row.run = a.run_id;
            row.round = r;
            row.response_time_us = recv.t_end_received_us - sent.t_start_sent_us;
            row.loss_pct =
                100.0 * (1.0 - static_cast<double>(recv.chunks_received) / layout.num_chunks);
            if (!a.payload_only) {
                const EvalResult eval = evaluate(w, shape, data.test);
                row.test_loss = eval.loss;
                row.test_accuracy = eval.accuracy;
            }
            csv.append(row);
            if (!a.quiet)
                std::cout << "round " << r << " response_us=" << *row.response_time_us
                          << " global_loss_pct=" << *row.loss_pct
                          << (row.test_loss ? " loss=" + std::to_string(*row.test_loss) : "")
                          << std::endl;
        } catch (const RoundTimeout& e) {
            std::cerr << "client " << a.id << ": round " << r << ": " << e.what() << std::endl;
            return 2;
        }
    }
    // The server may still be retransmitting its last END if our final ack
    // was lost; answer until it goes quiet.
    session.answer_server_ends_for(std::chrono::milliseconds(3 * a.retransmit_ms + 100));
    return 0;
}

// ---------------------------------------------------------------------------
// bench: spawn a server process and N client processes per configuration.

struct BenchArgs {
    std::vector<std::string> configs{"udp_exact", "udp_approx", "tcp_exact", "tcp_approx"};
    unsigned reps = 5;
    int rounds = 20;
    unsigned clients = 10;
    unsigned workers = 5;
    unsigned dim = 32;
    unsigned classes = 10;
    std::size_t train_samples = 10'000;
    std::size_t test_samples = 2'000;
    unsigned epochs = 1;
    unsigned batch = 50;
    float eta = 0.1f;
    std::uint64_t seed = 1;
    double loss_rate = 0.0;
    std::uint64_t loss_seed = 1;
    bool payload_only = false;
    std::size_t params = 2'000'000;
    std::string out = "bench_out";
    unsigned deadline_ms = 30000;
    bool micro = true;
};

struct Child {
    pid_t pid = -1;
    int stdout_fd = -1;
};

Child spawn(const std::vector<std::string>& args, bool capture_stdout) {
    int pipefd[2] = {-1, -1};
    if (capture_stdout && pipe(pipefd) != 0)
        throw std::system_error(errno, std::generic_category(), "pipe");
    const pid_t pid = fork();
    if (pid < 0) throw std::system_error(errno, std::generic_category(), "fork");
    if (pid == 0) {
        if (capture_stdout) {
            dup2(pipefd[1], STDOUT_FILENO);
            close(pipefd[0]);
            close(pipefd[1]);
        }
        std::vector<char*> argv;
        static char self[] = "/proc/self/exe";
        argv.push_back(self);
        std::vector<std::string> copy = args;
        for (auto& s : copy) argv.push_back(s.data());
        argv.push_back(nullptr);
        execv("/proc/self/exe", argv.data());
        _exit(127);
    }
    if (capture_stdout) close(pipefd[1]);
    return {pid, capture_stdout ? pipefd[0] : -1};
}

// Reads lines from fd until one starts with "listening on ", returns the
// endpoint text.
std::string read_listening_line(int fd) {
    std::string buf;
    char c;
    while (true) {
        const ssize_t n = read(fd, &c, 1);
        if (n <= 0) throw std::runtime_error("server exited before reporting its port");
        if (c == '\n') {
            if (buf.rfind("listening on ", 0) == 0) return buf.substr(13);
            buf.clear();
            continue;
        }
        buf.push_back(c);
    }
}

int wait_child(pid_t pid) {
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return 128;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static CsvTable load(const std::string& path) {
        CsvTable t;
        std::ifstream in(path);
        if (!in) throw std::runtime_error("missing csv " + path);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (line.back() == ',') cells.push_back("");
            if (first) {
                t.header = cells;
                first = false;
            } else {
                t.rows.push_back(cells);
            }
        }
        return t;
    }

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

int run_bench(const BenchArgs& a) {
    fs::create_directories(a.out);
    bool partial_failure = false;

    std::ofstream summary(fs::path(a.out) / "summary.csv");
    summary << "config,rep,rounds,mean_response_time_us,final_test_loss,final_test_accuracy,"
               "mean_loss_pct\n";
    // Per-round curves across repetitions (the convergence comparison).
    std::map<std::string, std::vector<std::vector<double>>> losses;  // config -> [round][rep]
    std::map<std::string, std::vector<std::vector<double>>> accs;

    for (const std::string& config : a.configs) {
        const bool tcp = config.rfind("tcp", 0) == 0;
        const std::string mode = config.find("approx") != std::string::npos ? "approx" : "exact";
        for (unsigned rep = 0; rep < a.reps; ++rep) {
            const std::string tag = config + "_rep" + std::to_string(rep);
            const std::string server_csv = (fs::path(a.out) / ("server_" + tag + ".csv")).string();
            const std::size_t p =
                a.payload_only ? a.params : ModelShape{a.dim, a.classes}.param_count();

            std::vector<std::string> sargs{
                "server", "--transport", tcp ? "tcp" : "udp", "--mode", mode,
                "--clients", std::to_string(a.clients), "--workers", std::to_string(a.workers),
                "--bind", "127.0.0.1:0", "--rounds", std::to_string(a.rounds),
                "--csv", server_csv, "--run", std::to_string(rep),
                "--deadline-ms", std::to_string(a.deadline_ms), "--quiet",
                "--params", std::to_string(p)};

            Child server = spawn(sargs, true);
            std::string endpoint;
            try {
                endpoint = read_listening_line(server.stdout_fd);
            } catch (const std::exception& e) {
                std::cerr << "bench: " << tag << ": " << e.what() << std::endl;
                close(server.stdout_fd);
                wait_child(server.pid);
                partial_failure = true;
                continue;
            }

            std::vector<Child> clients;
            for (unsigned i = 0; i < a.clients; ++i) {
                const std::string client_csv =
                    (fs::path(a.out) / ("client_" + tag + "_" + std::to_string(i) + ".csv"))
                        .string();
                std::vector<std::string> cargs{
                    "client", "--transport", tcp ? "tcp" : "udp",
                    "--id", std::to_string(i), "--server", endpoint,
                    "--rounds", std::to_string(a.rounds),
                    "--seed", std::to_string(a.seed + rep),
                    "--epochs", std::to_string(a.epochs), "--batch", std::to_string(a.batch),
                    "--eta", std::to_string(a.eta),
                    "--dim", std::to_string(a.dim), "--classes", std::to_string(a.classes),
                    "--train-samples", std::to_string(a.train_samples),
                    "--test-samples", std::to_string(a.test_samples),
                    "--n-clients", std::to_string(a.clients),
                    "--csv", client_csv, "--run", std::to_string(rep),
                    "--deadline-ms", std::to_string(a.deadline_ms), "--quiet"};
                if (a.payload_only) {
                    cargs.push_back("--payload-only");
                    cargs.push_back("--params");
                    cargs.push_back(std::to_string(p));
                }
                if (!tcp && a.loss_rate > 0) {
                    cargs.insert(cargs.end(),
                                 {"--loss-rate", std::to_string(a.loss_rate), "--loss-seed",
                                  std::to_string(a.loss_seed + rep * 1000), "--loss-dir", "both"});
                }
                clients.push_back(spawn(cargs, false));
            }

            for (const Child& c : clients)
                if (wait_child(c.pid) != 0) partial_failure = true;
            {
                char sink[256];
                while (read(server.stdout_fd, sink, sizeof(sink)) > 0) {}
                close(server.stdout_fd);
            }
            if (wait_child(server.pid) != 0) partial_failure = true;

            // Curves come from client 0; response time is averaged over all
            // clients' rounds.
            try {
                std::vector<double> responses;
                for (unsigned i = 0; i < a.clients; ++i) {
                    const CsvTable t = CsvTable::load(
                        (fs::path(a.out) / ("client_" + tag + "_" + std::to_string(i) + ".csv"))
                            .string());
                    const int rcol = t.col("response_time_us");
                    for (const auto& row : t.rows)
                        if (!row[rcol].empty()) responses.push_back(std::stod(row[rcol]));
                }
                const CsvTable c0 =
                    CsvTable::load((fs::path(a.out) / ("client_" + tag + "_0.csv")).string());
                const int lcol = c0.col("test_loss");
                const int acol = c0.col("test_accuracy");
                const int pcol = c0.col("loss_pct");
                auto& loss_rounds = losses[config];
                auto& acc_rounds = accs[config];
                loss_rounds.resize(std::max<std::size_t>(loss_rounds.size(), c0.rows.size()));
                acc_rounds.resize(std::max<std::size_t>(acc_rounds.size(), c0.rows.size()));
                double final_loss = std::nan("");
                double final_acc = std::nan("");
                std::vector<double> loss_pcts;
                for (std::size_t r = 0; r < c0.rows.size(); ++r) {
                    if (!c0.rows[r][lcol].empty()) {
                        final_loss = std::stod(c0.rows[r][lcol]);
                        final_acc = std::stod(c0.rows[r][acol]);
                        loss_rounds[r].push_back(final_loss);
                        acc_rounds[r].push_back(final_acc);
                    }
                    if (!c0.rows[r][pcol].empty()) loss_pcts.push_back(std::stod(c0.rows[r][pcol]));
                }
                summary << config << ',' << rep << ',' << a.rounds << ',' << mean_of(responses)
                        << ',' << final_loss << ',' << final_acc << ',' << mean_of(loss_pcts)
                        << '\n';
                summary.flush();
                std::cout << tag << " done: final_loss=" << final_loss
                          << " final_acc=" << final_acc << std::endl;
            } catch (const std::exception& e) {
                std::cerr << "bench: aggregation for " << tag << " failed: " << e.what()
                          << std::endl;
                partial_failure = true;
            }
        }
    }

    if (!a.payload_only) {
        std::ofstream curves(fs::path(a.out) / "curves.csv");
        curves << "config,round,test_loss_mean,test_loss_std,test_accuracy_mean,"
                  "test_accuracy_std\n";
        for (const auto& [config, rounds] : losses) {
            for (std::size_t r = 0; r < rounds.size(); ++r) {
                curves << config << ',' << r << ',' << mean_of(rounds[r]) << ','
                       << stddev_of(rounds[r]) << ',' << mean_of(accs[config][r]) << ','
                       << stddev_of(accs[config][r]) << '\n';
            }
        }
    }

    if (a.micro) {
        const ContentionResult micro = contention_benchmark();
        std::ofstream out(fs::path(a.out) / "micro.csv");
        out << "workers,elements,adds_per_worker,exact_mops,approx_mops,ratio\n";
        out << micro.workers << ',' << micro.elements << ',' << micro.adds_per_worker << ','
            << micro.exact_mops << ',' << micro.approx_mops << ',' << micro.ratio() << '\n';
        std::cout << "micro contention: exact=" << micro.exact_mops
                  << " Mops approx=" << micro.approx_mops << " Mops ratio=" << micro.ratio()
                  << std::endl;
    }

    if (partial_failure) {
        std::cerr << "bench: some children failed; results are partial" << std::endl;
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    signal(SIGPIPE, SIG_IGN);
    CLI::App app{"pipelined UDP federated-averaging server, TCP baseline, and bench harness"};
    app.require_subcommand(1);

    ServerArgs sa;
    CLI::App* server = app.add_subcommand("server", "run an aggregation server");
    server->add_option("--transport", sa.net.transport)->check(CLI::IsMember({"udp", "tcp"}));
    server->add_option("--mode", sa.net.mode)->check(CLI::IsMember({"exact", "approx"}));
    server->add_option("--clients", sa.clients)->check(CLI::PositiveNumber);
    server->add_option("--workers", sa.workers)->check(CLI::PositiveNumber);
    server->add_option("--params", sa.params)->check(CLI::PositiveNumber);
    server->add_option("--chunk-capacity", sa.chunk_capacity)
        ->check(CLI::Range(std::size_t{1}, kChunkCapacity));
    server->add_option("--bind", sa.bind);
    server->add_option("--rounds", sa.rounds)->check(CLI::PositiveNumber);
    server->add_option("--csv", sa.csv);
    server->add_option("--client-ports", sa.client_ports)->delimiter(',');
    server->add_option("--end-ack-window-ms", sa.end_ack_window_ms);
    server->add_option("--retransmit-ms", sa.retransmit_ms)->check(CLI::PositiveNumber);
    server->add_option("--deadline-ms", sa.deadline_ms)->check(CLI::PositiveNumber);
    server->add_option("--ring-capacity", sa.ring_capacity);
    server->add_option("--loss-rate", sa.net.loss_rate)->check(CLI::Range(0.0, 1.0));
    server->add_option("--loss-seed", sa.net.loss_seed);
    server->add_option("--loss-dir", sa.net.loss_dir)
        ->check(CLI::IsMember({"outbound", "inbound", "both"}));
    server->add_option("--run", sa.run_id);
    server->add_flag("--quiet", sa.quiet);

    ClientArgs ca;
    CLI::App* client = app.add_subcommand("client", "run a federated client");
    client->add_option("--transport", ca.net.transport)->check(CLI::IsMember({"udp", "tcp"}));
    client->add_option("--id", ca.id);
    client->add_option("--server", ca.server)->required();
    client->add_option("--rounds", ca.rounds)->check(CLI::PositiveNumber);
    client->add_flag("--payload-only", ca.payload_only);
    client->add_option("--params", ca.params)->check(CLI::PositiveNumber);
    client->add_option("--chunk-capacity", ca.chunk_capacity)
        ->check(CLI::Range(std::size_t{1}, kChunkCapacity));
    client->add_option("--epochs", ca.epochs)->check(CLI::PositiveNumber);
    client->add_option("--batch", ca.batch)->check(CLI::PositiveNumber);
    client->add_option("--eta", ca.eta);
    client->add_option("--seed", ca.seed);
    client->add_option("--dim", ca.dim)->check(CLI::PositiveNumber);
    client->add_option("--classes", ca.classes)->check(CLI::PositiveNumber);
    client->add_option("--train-samples", ca.train_samples)->check(CLI::PositiveNumber);
    client->add_option("--test-samples", ca.test_samples)->check(CLI::PositiveNumber);
    client->add_option("--n-clients", ca.n_clients)->check(CLI::PositiveNumber);
    client->add_option("--source-port", ca.source_port);
    client->add_option("--retransmit-ms", ca.retransmit_ms)->check(CLI::PositiveNumber);
    client->add_option("--deadline-ms", ca.deadline_ms)->check(CLI::PositiveNumber);
    client->add_option("--send-burst", ca.send_burst)->check(CLI::PositiveNumber);
    client->add_option("--send-interval-us", ca.send_interval_us);
    client->add_option("--loss-rate", ca.net.loss_rate)->check(CLI::Range(0.0, 1.0));
    client->add_option("--loss-seed", ca.net.loss_seed);
    client->add_option("--loss-dir", ca.net.loss_dir)
        ->check(CLI::IsMember({"outbound", "inbound", "both"}));
    client->add_option("--csv", ca.csv);
    client->add_option("--run", ca.run_id);
    client->add_flag("--quiet", ca.quiet);

    BenchArgs ba;
    CLI::App* bench = app.add_subcommand("bench", "run the configuration matrix");
    bench->add_option("--configs", ba.configs)->delimiter(',');
    bench->add_option("--reps", ba.reps)->check(CLI::PositiveNumber);
    bench->add_option("--rounds", ba.rounds)->check(CLI::PositiveNumber);
    bench->add_option("--clients", ba.clients)->check(CLI::PositiveNumber);
    bench->add_option("--workers", ba.workers)->check(CLI::PositiveNumber);
    bench->add_option("--dim", ba.dim)->check(CLI::PositiveNumber);
    bench->add_option("--classes", ba.classes)->check(CLI::PositiveNumber);
    bench->add_option("--train-samples", ba.train_samples)->check(CLI::PositiveNumber);
    bench->add_option("--test-samples", ba.test_samples)->check(CLI::PositiveNumber);
    bench->add_option("--epochs", ba.epochs)->check(CLI::PositiveNumber);
    bench->add_option("--batch", ba.batch)->check(CLI::PositiveNumber);
    bench->add_option("--eta", ba.eta);
    bench->add_option("--seed", ba.seed);
    bench->add_option("--loss-rate", ba.loss_rate)->check(CLI::Range(0.0, 1.0));
    bench->add_option("--loss-seed", ba.loss_seed);
    bench->add_flag("--payload-only", ba.payload_only);
    bench->add_option("--params", ba.params)->check(CLI::PositiveNumber);
    bench->add_option("--out", ba.out);
    bench->add_option("--deadline-ms", ba.deadline_ms)->check(CLI::PositiveNumber);
    bench->add_flag("--micro,!--no-micro", ba.micro);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (server->parsed()) return run_server(sa);
        if (client->parsed()) return run_client(ca);
        if (bench->parsed()) return run_bench(ba);
    } catch (const std::exception& e) {
        std::cerr << "fedpipe: " << e.what() << std::endl;
        return 2;
    }
    return 1;
}
