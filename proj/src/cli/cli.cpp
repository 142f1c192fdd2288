#include "staggercast/cli/cli.hpp"

#include "staggercast/errors.hpp"
#include "staggercast/proxy/server.hpp"
#include "staggercast/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef STAGGERCAST_VERSION
#define STAGGERCAST_VERSION "0.0.0-unknown"
#endif

namespace staggercast::cli {

namespace fs = std::filesystem;

std::string version() {
    return STAGGERCAST_VERSION;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
    auto number = [&](std::string_view s) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
            throw std::invalid_argument("bad seed '" + std::string(s) + "'");
        }
        return v;
    };
    const auto dots = text.find("..");
    if (dots == std::string::npos) return {number(text)};
    const auto lo = number(std::string_view(text).substr(0, dots));
    const auto hi = number(std::string_view(text).substr(dots + 2));
    if (hi < lo) throw std::invalid_argument("empty seed range '" + text + "'");
    if (hi - lo >= 1'000'000) throw std::invalid_argument("seed range too large '" + text + "'");
    std::vector<std::uint64_t> out;
    for (auto s = lo;; ++s) {
        out.push_back(s);
        if (s == hi) break;
    }
    return out;
}

namespace {

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
    const char* env = std::getenv("STAGGERCAST_LOG_LEVEL");
    const std::string v = env ? env : "info";
    if (v == "quiet" || v == "error" || v == "warn") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

void write_report(const fs::path& dir, const SimReport& report) {
    fs::create_directories(dir);
    write_file(dir / "summary.json", summary_json(report).dump(2) + "\n");
    std::ostringstream csv;
    write_series_csv(csv, report);
    write_file(dir / "series.csv", csv.str());
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config;
    std::string seeds;
    std::string out;
    bool force = false;
    bool baseline = false;
    unsigned jobs = 1;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const Scenario scenario = load_scenario(a.config);
    const auto seeds = a.seeds.empty() ? std::vector<std::uint64_t>{scenario.seed} : parse_seed_range(a.seeds);
    const bool sweep = a.seeds.find("..") != std::string::npos;

    const fs::path dir(a.out);
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!a.force) throw std::runtime_error(dir.string() + " already holds a run; pass --force to replace it");
        if (!fs::exists(dir / "manifest.json")) {
            throw std::runtime_error(dir.string() + " is not a run directory; refusing to replace it");
        }
        fs::remove_all(dir);
    }
    fs::create_directories(dir);

    Json manifest{{"run_id", dir.filename().string()},
                  {"version", version()},
                  {"configs", Json::array()},
                  {"seeds", seeds},
                  {"output_dir", dir.string()},
                  {"baseline", a.baseline},
                  {"started_at", utc_now()},
                  {"finished_at", nullptr}};
    for (const auto& src : scenario.sources) manifest["configs"].push_back(src.string());
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::atomic<std::size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr error;
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                const auto seed = seeds[i];
                const fs::path run_dir = sweep ? dir / ("seed-" + std::to_string(seed)) : dir;
                const auto inputs = materialize(scenario, seed);
                write_report(run_dir, run_scenario(scenario, inputs, seed, scenario.dsm_enabled));
                if (a.baseline) write_report(run_dir / "baseline", run_scenario(scenario, inputs, seed, false));
            } catch (...) {
                std::lock_guard lock(error_mu);
                if (!error) error = std::current_exception();
                next = seeds.size();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(seeds.size())));
    std::vector<std::thread> threads;
    for (unsigned j = 1; j < jobs; ++j) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);

    manifest["finished_at"] = utc_now();
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
    if (log_level() != LogLevel::Quiet) out << "wrote " << seeds.size() << " run(s) to " << dir.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportRow {
    std::string run;
    std::string resource;
    double peak_to_mean = 0.0;
    double p95 = 0.0;
    double acceptance = 0.0;
};

void collect_runs(const fs::path& dir, const std::string& label, const std::string& resource,
                  std::vector<ReportRow>& rows) {
    if (fs::exists(dir / "summary.json")) {
        const Json s = read_json_file(dir / "summary.json");
        for (const auto& [name, r] : s.at("resources").items()) {
            if (resource != "all" && name != resource) continue;
            rows.push_back({label, name, r.at("peak_to_mean").get<double>(), r.at("p95").get<double>(),
                            s.at("acceptance_rate").get<double>()});
        }
    }
    if (fs::exists(dir / "baseline")) collect_runs(dir / "baseline", label + "/baseline", resource, rows);
    std::vector<fs::path> seeds;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory() && e.path().filename().string().starts_with("seed-")) seeds.push_back(e.path());
    }
    std::sort(seeds.begin(), seeds.end(), [](const fs::path& x, const fs::path& y) {
        return std::stoull(x.filename().string().substr(5)) < std::stoull(y.filename().string().substr(5));
    });
    for (const auto& s : seeds) collect_runs(s, label + "/" + s.filename().string(), resource, rows);
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& format, const std::string& resource,
               std::ostream& out) {
    std::vector<ReportRow> rows;
    for (const auto& d : dirs) {
        const fs::path p(d);
        if (!fs::is_directory(p)) throw std::runtime_error("no such run directory: " + d);
        const auto before = rows.size();
        collect_runs(p, fs::path(d).lexically_normal().filename().empty() ? p.parent_path().filename().string()
                                                                           : p.lexically_normal().filename().string(),
                     resource, rows);
        if (rows.size() == before) throw std::runtime_error("no runs found under " + d);
    }
    if (format == "csv") {
        out << "run,resource,peak_to_mean,p95,acceptance\n";
        for (const auto& r : rows) {
            out << r.run << ',' << r.resource << ',' << format_double(r.peak_to_mean) << ',' << format_double(r.p95)
                << ',' << format_double(r.acceptance) << '\n';
        }
        return kOk;
    }
    std::vector<std::array<std::string, 5>> table{{"run", "resource", "peak_to_mean", "p95", "acceptance"}};
    for (const auto& r : rows) {
        std::ostringstream ptm, p95, acc;
        ptm << std::fixed << std::setprecision(4) << r.peak_to_mean;
        p95 << std::fixed << std::setprecision(0) << r.p95;
        acc << std::fixed << std::setprecision(4) << r.acceptance;
        table.push_back({r.run, r.resource, ptm.str(), p95.str(), acc.str()});
    }
    std::array<std::size_t, 5> width{};
    for (const auto& row : table) {
        for (std::size_t i = 0; i < 5; ++i) width[i] = std::max(width[i], row[i].size());
    }
    for (const auto& row : table) {
        for (std::size_t i = 0; i < 5; ++i) {
            if (i < 2) out << std::left << std::setw(static_cast<int>(width[i])) << row[i];
            else out << std::right << std::setw(static_cast<int>(width[i])) << row[i];
            out << (i + 1 < 5 ? "  " : "\n");
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    std::vector<std::string> scenarios, proxies, rulesets, workloads, populations, networks;
};

template <class F>
void validate_file(const std::string& file, F parse) {
    const Json doc = read_json_file(file);
    try {
        parse(doc);
    } catch (const ConfigError& e) {
        std::string message = e.what();
        if (!e.path().empty()) message.erase(0, e.path().size() + 2);
        throw ConfigError(file + ":" + (e.path().empty() ? "/" : e.path()), message);
    }
}

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
    std::size_t n = 0;
    for (const auto& f : a.scenarios) {
        load_scenario(f);
        out << "ok " << f << "\n";
        ++n;
    }
    for (const auto& f : a.proxies) {
        proxy::load_proxy_config(f);
        out << "ok " << f << "\n";
        ++n;
    }
    for (const auto& f : a.rulesets) {
        validate_file(f, [](const Json& j) { parse_ruleset(j); });
        out << "ok " << f << "\n";
        ++n;
    }
    for (const auto& f : a.workloads) {
        validate_file(f, [](const Json& j) { parse_workload_config(j); });
        out << "ok " << f << "\n";
        ++n;
    }
    for (const auto& f : a.populations) {
        validate_file(f, [](const Json& j) { parse_population_spec(j); });
        out << "ok " << f << "\n";
        ++n;
    }
    for (const auto& f : a.networks) {
        validate_file(f, [](const Json& j) { parse_net_config(j); });
        out << "ok " << f << "\n";
        ++n;
    }
    if (n == 0) throw ConfigError("", "nothing to validate; pass --config, --proxy-config, --ruleset, ...");
    return kOk;
}

// ---------------------------------------------------------------------------
// proxy

struct ProxyArgs {
    std::string listen = "127.0.0.1:8080";
    std::string config;
    std::string ruleset;
    int upstream_timeout_ms = 10000;
};

std::atomic<bool> g_stop{false};
std::atomic<bool> g_reload{false};

extern "C" void on_stop_signal(int) {
    g_stop = true;
}
extern "C" void on_reload_signal(int) {
    g_reload = true;
}

std::shared_ptr<const proxy::ProxyConfig> load_proxy_snapshot(const ProxyArgs& a) {
    auto config = proxy::load_proxy_config(a.config);
    if (!a.ruleset.empty()) {
        validate_file(a.ruleset, [&](const Json& j) { config.ruleset = parse_ruleset(j); });
    }
    return std::make_shared<const proxy::ProxyConfig>(std::move(config));
}

int cmd_proxy(const ProxyArgs& a, std::ostream& out, std::ostream& err) {
    const auto colon = a.listen.rfind(':');
    int port = -1;
    if (colon != std::string::npos) {
        const auto text = a.listen.substr(colon + 1);
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
        if (ec != std::errc{} || p != text.data() + text.size() || port < 0 || port > 65535) port = -1;
    }
    if (port < 0) throw ConfigError("--listen", "expected host:port, got '" + a.listen + "'");
    if (a.upstream_timeout_ms <= 0) throw ConfigError("--upstream-timeout-ms", "must be > 0");
    const std::string host = a.listen.substr(0, colon);

    auto snapshot = load_proxy_snapshot(a);
    std::shared_ptr<proxy::ProxyCore> core;
    auto upstream =
        std::make_shared<proxy::HttplibUpstream>([&core] { return core->config(); }, a.upstream_timeout_ms);
    core = std::make_shared<proxy::ProxyCore>(snapshot, upstream);

    std::mutex log_mu;
    std::ofstream log_file;
    if (!snapshot->request_log.empty()) {
        log_file.open(snapshot->request_log, std::ios::app);
        if (!log_file) throw std::runtime_error("cannot open request log " + snapshot->request_log);
        core->set_log_sink([&](const std::string& line) {
            std::lock_guard lock(log_mu);
            log_file << line << '\n';
            log_file.flush();
        });
    }

    proxy::ProxyServer server(*core);
    const int bound = server.bind(host, port);
    if (bound < 0) throw std::runtime_error("cannot listen on " + a.listen);
    if (log_level() != LogLevel::Quiet) out << "listening on " << host << ":" << bound << std::endl;

    g_stop = false;
    g_reload = false;
    std::signal(SIGINT, on_stop_signal);
    std::signal(SIGTERM, on_stop_signal);
    std::signal(SIGHUP, on_reload_signal);
    std::thread watcher([&] {
        while (!g_stop) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
            if (g_reload.exchange(false)) {
                try {
                    core->reload(load_proxy_snapshot(a));
                    if (log_level() != LogLevel::Quiet) err << "configuration reloaded" << std::endl;
                } catch (const std::exception& e) {
                    err << "reload failed, keeping the previous configuration: " << e.what() << std::endl;
                }
            }
            core->sessions().purge_expired(
                std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count());
        }
        server.stop();
    });
    const bool ok = server.listen();
    g_stop = true;
    watcher.join();
    return ok ? kOk : kRuntimeError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Demand-side management simulator and proxy", "staggercast"};
    app.set_version_flag("--version", version());
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a scenario and write summary.json and series.csv");
    simulate->add_option("--config", sim.config, "Scenario JSON")->required();
    simulate->add_option("--seed", sim.seeds, "Seed N or inclusive range A..B (default: scenario seed)");
    simulate->add_option("--out", sim.out, "Output directory (write-once)")->required();
    simulate->add_flag("--force", sim.force, "Replace an existing run directory");
    simulate->add_flag("--baseline", sim.baseline, "Also write the DSM-off baseline under baseline/");
    simulate->add_option("--jobs", sim.jobs, "Seeds simulated in parallel")->check(CLI::Range(1u, 256u));

    std::vector<std::string> report_dirs;
    std::string report_format = "text";
    std::string report_resource = "transit";
    auto* report = app.add_subcommand("report", "Compare runs: peak_to_mean, p95, acceptance rate");
    report->add_option("runs", report_dirs, "Run directories")->required();
    report->add_option("--format", report_format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
    report->add_option("--resource", report_resource, "transit, aggregation or all")
        ->check(CLI::IsMember({"transit", "aggregation", "all"}));

    ValidateArgs val;
    auto* validate = app.add_subcommand("validate", "Parse and cross-check configuration files");
    validate->add_option("--config", val.scenarios, "Scenario JSON");
    validate->add_option("--proxy-config", val.proxies, "Proxy JSON");
    validate->add_option("--ruleset", val.rulesets, "Ruleset JSON");
    validate->add_option("--workload", val.workloads, "Workload JSON");
    validate->add_option("--population", val.populations, "Population JSON");
    validate->add_option("--network", val.networks, "Network JSON");

    ProxyArgs px;
    auto* proxy_cmd = app.add_subcommand("proxy", "Run the intercepting HTTP proxy");
    proxy_cmd->add_option("--listen", px.listen, "host:port (port 0 picks one)");
    proxy_cmd->add_option("--config", px.config, "Proxy JSON")->required();
    proxy_cmd->add_option("--ruleset", px.ruleset, "Ruleset JSON replacing the config's");
    proxy_cmd->add_option("--upstream-timeout-ms", px.upstream_timeout_ms, "Upstream connect/read timeout");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kConfigError;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(sim, out);
        if (report->parsed()) return cmd_report(report_dirs, report_format, report_resource, out);
        if (validate->parsed()) return cmd_validate(val, out);
        if (proxy_cmd->parsed()) return cmd_proxy(px, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const TraceError& e) {
        err << "trace error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kRuntimeError;
}

}  // namespace staggercast::cli
