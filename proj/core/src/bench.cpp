#include "proxyforge/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "proxyforge/dsl.hpp"
#include "proxyforge/forward.hpp"
#include "proxyforge/proxies.hpp"
#include "proxyforge/threading.hpp"

#include "json.hpp"

namespace proxyforge {

std::uint64_t entry_seed(std::uint64_t master_seed, std::size_t entry_index) {
    return derive_seed(master_seed, entry_index);
}

std::uint64_t capture_batch_seed(const TaskSpec& task) {
    return derive_seed(task.task_seed, 0xCAB0);
}

// ---------------------------------------------------------------------------
// training

namespace {

constexpr std::size_t kValidationSamples = 256;

// streams carved out of the task seed: training batches are shared across
// entries, validation is held out
std::uint64_t train_stream_seed(const TaskSpec& task, std::size_t step) {
    return derive_seed(task.task_seed, 0x100000 + step);
}
std::uint64_t validation_seed(const TaskSpec& task) { return derive_seed(task.task_seed, 0x7A11); }

double validation_loss(const Model& model, const std::vector<Batch>& batches) {
    double total = 0.0;
    for (const Batch& b : batches) {
        ForwardTrace trace = trace_forward(model, b);
        total += trace.tape.value(trace.loss_ce).item();
    }
    return total / static_cast<double>(batches.size());
}

// one SGD step on every parameter; returns the loss before the update
double sgd_step(Model& model, const Batch& batch, double lr) {
    ForwardTrace trace = trace_forward(model, batch);
    const double loss = trace.tape.value(trace.loss_ce).item();
    if (!std::isfinite(loss)) return loss;
    const std::vector<Tensor> grads = trace.tape.backward(trace.loss_ce);

    std::vector<NodeId> param_ids;
    param_ids.push_back(trace.embedding);
    for (const BlockTrace& bt : trace.blocks) {
        for (NodeId id : bt.params) param_ids.push_back(id);
    }
    param_ids.push_back(trace.head);

    std::vector<Tensor*> params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& g = grads[param_ids[i]];
        Tensor& p = *params[i];
        for (std::size_t t = 0; t < p.numel(); ++t) p[t] -= lr * g[t];
    }
    return loss;
}

}  // namespace

BenchmarkFile build_benchmark(std::size_t n_archs, std::size_t train_steps, std::uint64_t seed) {
    const std::vector<ArchSpec> grid = enumerate_archs();
    if (n_archs < 1 || n_archs > grid.size()) {
        throw std::invalid_argument("build_benchmark: n_archs outside [1, " +
                                    std::to_string(grid.size()) + "]");
    }

    BenchmarkFile bench;
    bench.task.task_seed = seed;
    bench.training.steps = train_steps;
    bench.training.seed = seed;

    std::vector<ArchSpec> chosen;
    if (n_archs == grid.size()) {
        chosen = grid;
    } else {
        // seeded subset, kept in grid order
        Rng rng(derive_seed(seed, 0x5E7EC7));
        std::vector<std::size_t> idx(grid.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < n_archs; ++i) {
            const std::size_t j = i + rng.index(idx.size() - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(n_archs);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) chosen.push_back(grid[i]);
    }

    const MarkovTask task(bench.task);
    std::vector<Batch> train_batches(train_steps);
    for (std::size_t t = 0; t < train_steps; ++t) {
        Rng rng(train_stream_seed(bench.task, t));
        train_batches[t] = task.sample_batch(rng, bench.training.batch_size);
    }
    std::vector<Batch> val_batches;
    {
        Rng rng(validation_seed(bench.task));
        const std::size_t per_batch = bench.training.batch_size;
        for (std::size_t done = 0; done < kValidationSamples; done += per_batch) {
            val_batches.push_back(task.sample_batch(rng, per_batch));
        }
    }

    bench.entries.resize(chosen.size());
    parallel_for(chosen.size(), [&](std::size_t i) {
        BenchEntry entry;
        entry.arch = chosen[i];
        Model model = build_model(entry.arch, entry_seed(seed, i));
        entry.param_count = model.param_count();
        bool diverged = false;
        for (std::size_t t = 0; t < train_steps; ++t) {
            const double loss = sgd_step(model, train_batches[t], bench.training.learning_rate);
            if (!std::isfinite(loss)) {
                diverged = true;
                break;
            }
        }
        if (!diverged) {
            const double vloss = validation_loss(model, val_batches);
            if (std::isfinite(vloss)) {
                entry.ground_truth = -vloss;  // higher is better
            } else {
                diverged = true;
            }
        }
        if (diverged) {
            entry.ground_truth = kDivergedGroundTruth;
            entry.flagged = true;
        }
        bench.entries[i] = std::move(entry);
    });

    std::size_t flagged = 0;
    for (const BenchEntry& e : bench.entries) flagged += e.flagged ? 1 : 0;
    if (flagged * 10 > bench.entries.size()) {
        throw DataError("build_benchmark: more than 10% of entries diverged");
    }
    return bench;
}

// ---------------------------------------------------------------------------
// persistence

namespace {

nlohmann::json arch_json(const ArchSpec& a) {
    return {{"n_layers", a.n_layers}, {"d_model", a.d_model},     {"n_heads", a.n_heads},
            {"d_ffn", a.d_ffn},       {"vocab_size", a.vocab_size}, {"seq_len", a.seq_len}};
}

ArchSpec arch_from(const nlohmann::json& j) {
    ArchSpec a;
    a.n_layers = j.at("n_layers").get<int>();
    a.d_model = j.at("d_model").get<int>();
    a.n_heads = j.at("n_heads").get<int>();
    a.d_ffn = j.at("d_ffn").get<int>();
    a.vocab_size = j.at("vocab_size").get<int>();
    a.seq_len = j.at("seq_len").get<int>();
    return a;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::string arch_to_json(const ArchSpec& spec) { return arch_json(spec).dump(); }

ArchSpec arch_from_json(const std::string& text) {
    try {
        return arch_from(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad ArchSpec JSON: ") + e.what());
    }
}

void save_benchmark(const BenchmarkFile& bench, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = bench.version;
    j["task"] = {{"vocab_size", bench.task.vocab_size},
                 {"seq_len", bench.task.seq_len},
                 {"task_seed", bench.task.task_seed}};
    j["training"] = {{"steps", bench.training.steps},
                     {"learning_rate", bench.training.learning_rate},
                     {"batch_size", bench.training.batch_size},
                     {"seed", bench.training.seed}};
    nlohmann::json entries = nlohmann::json::array();
    for (const BenchEntry& e : bench.entries) {
        nlohmann::json je;
        je["arch"] = arch_json(e.arch);
        // -inf is not representable in JSON; flagged entries store null
        if (e.flagged) {
            je["ground_truth"] = nullptr;
        } else {
            je["ground_truth"] = e.ground_truth;
        }
        je["param_count"] = e.param_count;
        je["flagged"] = e.flagged;
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);
    write_file(path, j.dump(2) + "\n");
}

BenchmarkFile load_benchmark(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("benchmark JSON parse failure: " + std::string(e.what()));
    }
    BenchmarkFile bench;
    try {
        bench.version = j.at("version").get<std::string>();
        if (bench.version != kBenchmarkVersion) {
            throw DataError("benchmark version mismatch: found '" + bench.version + "', expected '" +
                            kBenchmarkVersion + "'");
        }
        bench.task.vocab_size = j.at("task").at("vocab_size").get<int>();
        bench.task.seq_len = j.at("task").at("seq_len").get<int>();
        bench.task.task_seed = j.at("task").at("task_seed").get<std::uint64_t>();
        bench.training.steps = j.at("training").at("steps").get<std::size_t>();
        bench.training.learning_rate = j.at("training").at("learning_rate").get<double>();
        bench.training.batch_size = j.at("training").at("batch_size").get<std::size_t>();
        bench.training.seed = j.at("training").at("seed").get<std::uint64_t>();
        for (const nlohmann::json& je : j.at("entries")) {
            BenchEntry e;
            e.arch = arch_from(je.at("arch"));
            e.flagged = je.at("flagged").get<bool>();
            e.ground_truth =
                e.flagged ? kDivergedGroundTruth : je.at("ground_truth").get<double>();
            e.param_count = je.at("param_count").get<std::size_t>();
            bench.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("benchmark JSON missing fields: " + std::string(e.what()));
    }
    return bench;
}

// ---------------------------------------------------------------------------
// evaluation

EvalReport eval_proxy(const std::string& target, const BenchmarkFile& bench) {
    const auto start = std::chrono::steady_clock::now();

    std::optional<ProxyId> proxy = proxy_from_name(target);
    std::optional<SymbolicExpression> expr;
    if (!proxy) {
        try {
            expr = parse_expression(target);
        } catch (const ParseError& e) {
            throw std::invalid_argument("unknown proxy id and unparsable expression '" + target +
                                        "': " + e.what());
        }
    }

    EvalReport report;
    report.target = target;
    report.rows.resize(bench.entries.size());

    const MarkovTask task(bench.task);
    Rng batch_rng(capture_batch_seed(bench.task));
    const Batch batch = task.sample_batch(batch_rng, bench.training.batch_size);

    parallel_for(bench.entries.size(), [&](std::size_t i) {
        const BenchEntry& entry = bench.entries[i];
        EvalRow row;
        row.arch = entry.arch;
        row.ground_truth = entry.ground_truth;
        try {
            const Model model = build_model(entry.arch, entry_seed(bench.training.seed, i));
            const NetworkStatistics stats = capture(model, batch);
            row.score = proxy ? score(*proxy, model, stats) : evaluate(*expr, stats);
        } catch (const CaptureError&) {
            row.score = std::nullopt;
        }
        report.rows[i] = std::move(row);
    });

    std::vector<double> scores;
    std::vector<double> truth;
    report.ranking.n = report.rows.size();
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const EvalRow& row = report.rows[i];
        if (!row.score || bench.entries[i].flagged) {
            ++report.ranking.n_invalid;
            continue;
        }
        scores.push_back(*row.score);
        truth.push_back(row.ground_truth);
    }
    if (scores.size() >= 3) {
        report.ranking.spearman_rho = spearman(scores, truth);
        report.ranking.kendall_tau = kendall(scores, truth);
    }

    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string to_json(const EvalReport& report) {
    nlohmann::json j;
    j["kind"] = "proxyforge-eval-report";
    j["target"] = report.target;
    j["n"] = report.ranking.n;
    j["n_invalid"] = report.ranking.n_invalid;
    if (report.ranking.spearman_rho) {
        j["spearman_rho"] = *report.ranking.spearman_rho;
    } else {
        j["spearman_rho"] = nullptr;
    }
    if (report.ranking.kendall_tau) {
        j["kendall_tau"] = *report.ranking.kendall_tau;
    } else {
        j["kendall_tau"] = nullptr;
    }
    j["seconds"] = report.seconds;
    nlohmann::json rows = nlohmann::json::array();
    for (const EvalRow& row : report.rows) {
        nlohmann::json jr;
        jr["arch"] = arch_json(row.arch);
        if (row.score) {
            jr["score"] = *row.score;
        } else {
            jr["score"] = nullptr;
        }
        jr["ground_truth"] = std::isfinite(row.ground_truth) ? nlohmann::json(row.ground_truth)
                                                             : nlohmann::json(nullptr);
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("eval report JSON parse failure: " + std::string(e.what()));
    }
    EvalReport report;
    try {
        if (j.value("kind", "") != "proxyforge-eval-report") {
            throw DataError("not an eval report (missing kind marker)");
        }
        report.target = j.at("target").get<std::string>();
        report.ranking.n = j.at("n").get<std::size_t>();
        report.ranking.n_invalid = j.at("n_invalid").get<std::size_t>();
        if (!j.at("spearman_rho").is_null()) {
            report.ranking.spearman_rho = j.at("spearman_rho").get<double>();
        }
        if (!j.at("kendall_tau").is_null()) {
            report.ranking.kendall_tau = j.at("kendall_tau").get<double>();
        }
        report.seconds = j.at("seconds").get<double>();
        for (const nlohmann::json& jr : j.at("rows")) {
            EvalRow row;
            row.arch = arch_from(jr.at("arch"));
            if (!jr.at("score").is_null()) row.score = jr.at("score").get<double>();
            row.ground_truth = jr.at("ground_truth").is_null() ? kDivergedGroundTruth
                                                               : jr.at("ground_truth").get<double>();
            report.rows.push_back(std::move(row));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("eval report JSON missing fields: " + std::string(e.what()));
    }
    return report;
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    write_file(path, to_json(report));
}

EvalReport load_eval_report(const std::filesystem::path& path) {
    return eval_report_from_json(read_file(path));
}

// ---------------------------------------------------------------------------
// CSV table

namespace {

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
    std::string quoted = "\"";
    for (char c : value) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

}  // namespace

std::string report_csv(const std::vector<EvalReport>& reports) {
    std::vector<const EvalReport*> sorted;
    for (const EvalReport& r : reports) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const EvalReport* a, const EvalReport* b) {
        const double ra = a->ranking.spearman_rho.value_or(-std::numeric_limits<double>::infinity());
        const double rb = b->ranking.spearman_rho.value_or(-std::numeric_limits<double>::infinity());
        return ra > rb;
    });
    std::string csv = "proxy,spearman_rho,kendall_tau,n_invalid,seconds\r\n";
    for (const EvalReport* r : sorted) {
        csv += csv_field(r->target);
        csv += ',';
        if (r->ranking.spearman_rho) csv += format_double(*r->ranking.spearman_rho);
        csv += ',';
        if (r->ranking.kendall_tau) csv += format_double(*r->ranking.kendall_tau);
        csv += ',';
        csv += std::to_string(r->ranking.n_invalid);
        csv += ',';
        csv += format_double(r->seconds);
        csv += "\r\n";
    }
    return csv;
}

}  // namespace proxyforge
