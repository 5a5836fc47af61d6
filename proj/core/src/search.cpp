#include "proxyforge/search.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "proxyforge/bench.hpp"
#include "proxyforge/threading.hpp"

#include "json.hpp"

namespace proxyforge {

void validate(const SearchConfig& config) {
    if (config.population_size < 2) throw std::invalid_argument("SearchConfig: population_size < 2");
    if (config.selection_ratio <= 0.0 || config.selection_ratio > 1.0) {
        throw std::invalid_argument("SearchConfig: selection_ratio outside (0, 1]");
    }
    if (config.crossover_rate < 0.0 || config.crossover_rate > 1.0) {
        throw std::invalid_argument("SearchConfig: crossover_rate outside [0, 1]");
    }
    if (config.mutation_rate < 0.0 || config.mutation_rate > 1.0) {
        throw std::invalid_argument("SearchConfig: mutation_rate outside [0, 1]");
    }
    if (config.unary_depth < 1 || config.unary_depth > 5) {
        throw std::invalid_argument("SearchConfig: unary_depth outside [1, 5]");
    }
    if (config.fitness_sample_size < 1) {
        throw std::invalid_argument("SearchConfig: fitness_sample_size < 1");
    }
}

// ---------------------------------------------------------------------------
// rule-based pruning

namespace {

struct PairRule {
    UnaryOp first;
    UnaryOp second;
    const char* rule_id;
};

// conflict compositions (undefined results) and redundant compositions,
// matched against adjacent unary applications within one branch
constexpr PairRule kPairRules[] = {
    {UnaryOp::Neg, UnaryOp::Log, "neg-log"},
    {UnaryOp::Neg, UnaryOp::Sqrt, "neg-sqrt"},
    {UnaryOp::Neg, UnaryOp::LogSoftmax, "neg-logsoftmax"},
    {UnaryOp::Log, UnaryOp::Exp, "inverse-pair"},
    {UnaryOp::Exp, UnaryOp::Log, "inverse-pair"},
    {UnaryOp::Square, UnaryOp::Sqrt, "inverse-pair"},
    {UnaryOp::Sqrt, UnaryOp::Square, "inverse-pair"},
    {UnaryOp::Softmax, UnaryOp::Log, "softmax-log"},
    {UnaryOp::Neg, UnaryOp::Neg, "double-neg"},
    {UnaryOp::Reciprocal, UnaryOp::Reciprocal, "double-reciprocal"},
    {UnaryOp::Abs, UnaryOp::Abs, "double-abs"},
};

RpsVerdict check_branch(const Branch& branch) {
    const auto& u = branch.unary;
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        for (const PairRule& rule : kPairRules) {
            if (u[i] == rule.first && u[i + 1] == rule.second) {
                return {false, rule.rule_id};
            }
        }
    }
    // neg then relu pins the value at zero, so a following reciprocal divides by it
    for (std::size_t i = 0; i + 2 < u.size(); ++i) {
        if (u[i] == UnaryOp::Neg && u[i + 1] == UnaryOp::Relu && u[i + 2] == UnaryOp::Reciprocal) {
            return {false, "zero-reciprocal"};
        }
    }
    return {true, {}};
}

}  // namespace

RpsVerdict rps_check(const SymbolicExpression& expr) {
    RpsVerdict v = check_branch(expr.left);
    if (!v.valid) return v;
    return check_branch(expr.right);
}

// ---------------------------------------------------------------------------
// fitness

FitnessContext::FitnessContext(const BenchmarkFile& bench) {
    const MarkovTask task(bench.task);
    Rng batch_rng(capture_batch_seed(bench.task));
    const Batch batch = task.sample_batch(batch_rng, bench.training.batch_size);

    stats_.resize(bench.entries.size());
    ground_truth_.resize(bench.entries.size());
    std::vector<char> usable(bench.entries.size(), 1);
    parallel_for(bench.entries.size(), [&](std::size_t i) {
        const BenchEntry& entry = bench.entries[i];
        ground_truth_[i] = entry.ground_truth;
        const Model model = build_model(entry.arch, entry_seed(bench.training.seed, i));
        stats_[i] = capture(model, batch);
        usable[i] = entry.flagged ? 0 : 1;
    });
    // diverged entries carry no rank information; drop them from the oracle
    std::size_t keep = 0;
    for (std::size_t i = 0; i < stats_.size(); ++i) {
        if (!usable[i]) continue;
        if (keep != i) {
            stats_[keep] = std::move(stats_[i]);
            ground_truth_[keep] = ground_truth_[i];
        }
        ++keep;
    }
    stats_.resize(keep);
    ground_truth_.resize(keep);
}

double FitnessContext::fitness(const SymbolicExpression& expr,
                               const std::vector<std::size_t>& subset) const {
    std::vector<double> scores;
    std::vector<double> truth;
    scores.reserve(subset.size());
    truth.reserve(subset.size());
    std::size_t invalid = 0;
    for (std::size_t idx : subset) {
        const std::optional<double> s = evaluate(expr, stats_[idx]);
        if (!s) {
            ++invalid;
            continue;
        }
        scores.push_back(*s);
        truth.push_back(ground_truth_[idx]);
    }
    if (invalid * 5 > subset.size()) return kInvalidFitness;  // > 20% invalid
    if (scores.size() < 3) return kInvalidFitness;
    const std::optional<double> rho = spearman(scores, truth);
    if (!rho) return kInvalidFitness;  // constant scores carry no ranking
    return *rho;
}

// ---------------------------------------------------------------------------
// genetic operators

std::pair<std::size_t, std::size_t> tournament_select(const std::vector<Candidate>& population,
                                                      double selection_ratio, Rng& rng) {
    if (population.size() < 2) throw std::invalid_argument("tournament_select: population < 2");
    std::size_t pool_size =
        static_cast<std::size_t>(std::ceil(selection_ratio * static_cast<double>(population.size())));
    pool_size = std::max<std::size_t>(pool_size, 2);
    pool_size = std::min(pool_size, population.size());
    // top pool by fitness, ties broken towards older (lower-index) candidates
    std::vector<std::size_t> order(population.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return population[a].fitness > population[b].fitness;
    });
    const std::size_t first = rng.index(pool_size);
    std::size_t second = rng.index(pool_size - 1);
    if (second >= first) ++second;
    return {order[first], order[second]};
}

namespace {

OperandKind resample_operand(OperandKind exclude, Rng& rng) {
    constexpr std::array<OperandKind, kOperandCount> kAll = {
        OperandKind::A, OperandKind::J, OperandKind::G,
        OperandKind::H, OperandKind::W, OperandKind::S,
    };
    std::size_t pick = rng.index(kOperandCount - 1);
    for (std::size_t i = 0; i < kOperandCount; ++i) {
        if (kAll[i] == exclude) continue;
        if (pick == 0) return kAll[i];
        --pick;
    }
    return kAll[0];  // unreachable
}

}  // namespace

SymbolicExpression crossover(const SymbolicExpression& a, const SymbolicExpression& b, double rate,
                             Rng& rng) {
    if (!rng.bernoulli(rate)) return a;
    SymbolicExpression off;
    off.left = a.left;
    off.right = b.right;
    off.binary = a.binary;
    if (off.left.operand == off.right.operand) {
        off.right.operand = resample_operand(off.left.operand, rng);
    }
    return off;
}

SymbolicExpression mutate(const SymbolicExpression& expr, double rate, Rng& rng) {
    if (!rng.bernoulli(rate)) return expr;
    SymbolicExpression out = expr;
    const std::size_t unary_slots = expr.left.unary.size() + expr.right.unary.size();
    const std::size_t genes = 3 + unary_slots;  // two operands, the unary slots, the binary op
    const std::size_t gene = rng.index(genes);
    if (gene == 0) {
        out.left.operand = resample_operand(out.right.operand, rng);
    } else if (gene == 1) {
        out.right.operand = resample_operand(out.left.operand, rng);
    } else if (gene < 2 + unary_slots) {
        const std::size_t slot = gene - 2;
        UnaryOp& target = slot < out.left.unary.size()
                              ? out.left.unary[slot]
                              : out.right.unary[slot - out.left.unary.size()];
        target = static_cast<UnaryOp>(1 + rng.index(kUnaryCount));
    } else {
        out.binary = static_cast<BinaryOp>(1 + rng.index(kBinaryCount));
    }
    return out;
}

// ---------------------------------------------------------------------------
// full runs

namespace {

std::vector<std::size_t> draw_sample(std::size_t bench_size, std::size_t sample_size, Rng& rng) {
    const std::size_t s = std::min(sample_size, bench_size);
    std::vector<std::size_t> all(bench_size);
    for (std::size_t i = 0; i < bench_size; ++i) all[i] = i;
    if (s == bench_size) return all;
    // partial Fisher-Yates, first s slots
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t j = i + rng.index(bench_size - i);
        std::swap(all[i], all[j]);
    }
    all.resize(s);
    return all;
}

void sort_elitist(std::vector<Candidate>& population) {
    // stable: equal fitness keeps insertion (age) order
    std::stable_sort(population.begin(), population.end(),
                     [](const Candidate& a, const Candidate& b) { return a.fitness > b.fitness; });
}

// Keep the top-p proxies: the population is a set of genotypes, so a
// duplicated genotype is the same proxy and collapses onto its oldest copy.
// Duplicates only pad the population back to p when fewer than p distinct
// genotypes exist.
void truncate_elitist(std::vector<Candidate>& population, std::size_t p) {
    sort_elitist(population);
    std::vector<Candidate> distinct;
    std::vector<Candidate> duplicates;
    std::set<std::string> seen;
    for (Candidate& c : population) {
        if (seen.insert(serialize(c.expr)).second) {
            distinct.push_back(std::move(c));
        } else {
            duplicates.push_back(std::move(c));
        }
    }
    if (distinct.size() < p) {
        for (Candidate& c : duplicates) {
            if (distinct.size() == p) break;
            distinct.push_back(std::move(c));
        }
        sort_elitist(distinct);
    } else {
        distinct.resize(p);
    }
    population = std::move(distinct);
}

}  // namespace

SearchReport run_search(const SearchConfig& config, const FitnessContext& ctx) {
    validate(config);
    if (ctx.size() == 0) throw std::invalid_argument("run_search: empty benchmark");
    Rng rng(config.seed);

    SearchReport report;
    report.config = config;

    const std::vector<std::size_t> sample = draw_sample(ctx.size(), config.fitness_sample_size, rng);

    auto evaluate_fitness = [&](const SymbolicExpression& expr) {
        const double f = ctx.fitness(expr, sample);
        ++report.fitness_evaluations;
        if (f == kInvalidFitness) ++report.sentinel_evaluations;
        return f;
    };

    std::vector<Candidate> population;
    population.reserve(config.population_size + 1);
    while (population.size() < config.population_size) {
        SymbolicExpression expr = random_expr(rng, config.unary_depth);
        if (config.rps_enabled && !rps_check(expr).valid) {
            ++report.total_rps_rejections;
            continue;
        }
        population.push_back({std::move(expr), 0.0});
    }
    for (Candidate& c : population) c.fitness = evaluate_fitness(c.expr);
    sort_elitist(population);

    std::size_t improving_generations = 0;
    report.history.reserve(config.generations);
    for (std::size_t g = 0; g < config.generations; ++g) {
        const double previous_best = population.front().fitness;
        const auto [ia, ib] = tournament_select(population, config.selection_ratio, rng);
        const SymbolicExpression& pa = population[ia].expr;
        const SymbolicExpression& pb = population[ib].expr;

        GenerationRecord record;
        SymbolicExpression offspring;
        bool forced_sentinel = false;
        for (std::size_t attempt = 0;; ++attempt) {
            offspring = mutate(crossover(pa, pb, config.crossover_rate, rng), config.mutation_rate, rng);
            if (!config.rps_enabled || rps_check(offspring).valid) break;
            ++record.rps_rejections;
            if (attempt + 1 >= config.max_regen_attempts) {
                forced_sentinel = true;  // accepted anyway, carries the sentinel
                break;
            }
        }
        report.total_rps_rejections += record.rps_rejections;

        Candidate child;
        child.expr = std::move(offspring);
        if (forced_sentinel) {
            child.fitness = kInvalidFitness;
            ++report.fitness_evaluations;
            ++report.sentinel_evaluations;
        } else {
            child.fitness = evaluate_fitness(child.expr);
        }
        population.push_back(std::move(child));
        truncate_elitist(population, config.population_size);

        record.best_fitness = population.front().fitness;
        double mean = 0.0;
        for (const Candidate& c : population) mean += c.fitness;
        record.mean_fitness = mean / static_cast<double>(population.size());
        if (record.best_fitness > previous_best) ++improving_generations;
        report.history.push_back(record);
    }

    report.best_expression = serialize(population.front().expr);
    report.best_fitness = population.front().fitness;
    report.winning_rate = config.generations == 0
                              ? 0.0
                              : static_cast<double>(improving_generations) /
                                    static_cast<double>(config.generations);
    return report;
}

SearchReport random_search(const SearchConfig& config, const FitnessContext& ctx) {
    validate(config);
    if (ctx.size() == 0) throw std::invalid_argument("random_search: empty benchmark");
    Rng rng(config.seed);

    SearchReport report;
    report.config = config;

    const std::vector<std::size_t> sample = draw_sample(ctx.size(), config.fitness_sample_size, rng);

    double best = kInvalidFitness;
    std::string best_expr;
    double total_fitness = 0.0;
    std::size_t improving = 0;

    auto take = [&](std::size_t count) {
        bool improved = false;
        for (std::size_t i = 0; i < count; ++i) {
            const SymbolicExpression expr = random_expr(rng, config.unary_depth);
            const double f = ctx.fitness(expr, sample);
            ++report.fitness_evaluations;
            if (f == kInvalidFitness) ++report.sentinel_evaluations;
            total_fitness += f;
            if (f > best || best_expr.empty()) {
                if (f > best) improved = true;
                best = f;
                best_expr = serialize(expr);
            }
        }
        return improved;
    };

    take(config.population_size);
    report.history.reserve(config.generations);
    for (std::size_t g = 0; g < config.generations; ++g) {
        const bool improved = take(1);
        if (improved) ++improving;
        GenerationRecord record;
        record.best_fitness = best;
        record.mean_fitness = total_fitness / static_cast<double>(report.fitness_evaluations);
        report.history.push_back(record);
    }
    report.best_expression = best_expr;
    report.best_fitness = best;
    report.winning_rate = config.generations == 0
                              ? 0.0
                              : static_cast<double>(improving) / static_cast<double>(config.generations);
    return report;
}

// ---------------------------------------------------------------------------

std::string to_json(const SearchReport& report) {
    nlohmann::json j;
    j["config"] = {
        {"population_size", report.config.population_size},
        {"generations", report.config.generations},
        {"crossover_rate", report.config.crossover_rate},
        {"mutation_rate", report.config.mutation_rate},
        {"selection_ratio", report.config.selection_ratio},
        {"fitness_sample_size", report.config.fitness_sample_size},
        {"unary_depth", report.config.unary_depth},
        {"seed", report.config.seed},
        {"rps_enabled", report.config.rps_enabled},
        {"max_regen_attempts", report.config.max_regen_attempts},
    };
    j["best_expression"] = report.best_expression;
    j["best_fitness"] = report.best_fitness;
    j["total_rps_rejections"] = report.total_rps_rejections;
    j["fitness_evaluations"] = report.fitness_evaluations;
    j["sentinel_evaluations"] = report.sentinel_evaluations;
    j["winning_rate"] = report.winning_rate;
    nlohmann::json history = nlohmann::json::array();
    for (const GenerationRecord& r : report.history) {
        history.push_back({{"best_fitness", r.best_fitness},
                           {"mean_fitness", r.mean_fitness},
                           {"rps_rejections", r.rps_rejections}});
    }
    j["history"] = std::move(history);
    return j.dump(2);
}

}  // namespace proxyforge
