#include "maclab/runner.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "maclab/asymptotic_bounds.hpp"
#include "maclab/cdma.hpp"
#include "maclab/common.hpp"
#include "maclab/csv.hpp"
#include "maclab/finite_bounds.hpp"
#include "maclab/matrix_se.hpp"
#include "maclab/sparc.hpp"
#include "maclab/special.hpp"

namespace maclab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Strict view over a JSON object: every key must be consumed.
class ConfigView {
public:
    explicit ConfigView(const json& j) : j_(j) {
        if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    }

    template <class T>
    T get(const std::string& key) {
        if (!j_.contains(key)) throw std::invalid_argument("config: missing key '" + key + "'");
        seen_.insert(key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw std::invalid_argument("config: bad value for '" + key + "': " + e.what());
        }
    }

    template <class T>
    T get_or(const std::string& key, T def) {
        if (!j_.contains(key)) return def;
        return get<T>(key);
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    void finish() const {
        for (auto& [key, _] : j_.items())
            if (!seen_.count(key) && key != "command" && key != "seed" && key != "out")
                throw std::invalid_argument("config: unknown key '" + key + "'");
    }

private:
    const json& j_;
    std::set<std::string> seen_;
};

std::vector<double> parse_grid(const json& v) {
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (const auto& x : v) out.push_back(x.get<double>());
    } else if (v.is_object()) {
        double from = v.at("from").get<double>();
        double to = v.at("to").get<double>();
        double step = v.at("step").get<double>();
        if (!(step > 0.0)) throw std::invalid_argument("grid: step must be > 0");
        for (double x = from; x <= to + 1e-12; x += step) out.push_back(x);
    } else {
        throw std::invalid_argument("grid: expected number, array, or {from,to,step}");
    }
    if (out.empty()) throw std::invalid_argument("grid: empty");
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string git_revision() {
    FILE* p = popen("git rev-parse HEAD 2>/dev/null", "r");
    if (!p) return "unknown";
    char buf[64] = {0};
    std::string rev = "unknown";
    if (fgets(buf, sizeof(buf), p)) {
        rev = buf;
        while (!rev.empty() && (rev.back() == '\n' || rev.back() == '\r')) rev.pop_back();
    }
    pclose(p);
    return rev.empty() ? "unknown" : rev;
}

struct RunContext {
    std::uint64_t seed = 1;
    fs::path out_dir = ".";
    int threads = 1;
    json resolved;  // config echoed into outputs (no thread count)
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    std::string echo() const { return resolved.dump(); }

    void write_sidecar(const std::string& command) const {
        json meta;
        meta["command"] = command;
        meta["config"] = resolved;
        meta["config_hash"] = fnv1a(resolved.dump());
        meta["seed"] = seed;
        meta["git_revision"] = git_revision();
        meta["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fs::path tmp = out_dir / (command + ".meta.json.tmp");
        fs::path final_path = out_dir / (command + ".meta.json");
        std::ofstream out(tmp, std::ios::trunc);
        out << meta.dump(2) << "\n";
        out.close();
        fs::rename(tmp, final_path);
    }
};

DenoiserKind parse_cdma_denoiser(const std::string& name, double alpha_hat) {
    DenoiserKind k;
    k.alpha_hat = alpha_hat;
    if (name == "bayes") k.kind = CdmaDenoiser::bayes;
    else if (name == "marginal") k.kind = CdmaDenoiser::marginal;
    else if (name == "threshold") k.kind = CdmaDenoiser::threshold;
    else throw std::invalid_argument("denoiser: expected bayes|marginal|threshold");
    return k;
}

SparcDenoiser parse_sparc_denoiser(const std::string& name) {
    if (name == "bayes") return SparcDenoiser::bayes;
    if (name == "marginal") return SparcDenoiser::marginal;
    throw std::invalid_argument("denoiser: expected bayes|marginal");
}

PotentialKind parse_kind(const std::string& name) {
    if (name == "bayes") return PotentialKind::bayes;
    if (name == "marginal") return PotentialKind::marginal;
    throw std::invalid_argument("kind: expected bayes|marginal");
}

double resolve_mu(ConfigView& cv, double alpha) {
    bool has_mu = cv.has("mu"), has_mua = cv.has("mu_a");
    if (has_mu == has_mua)
        throw std::invalid_argument("config: provide exactly one of 'mu' or 'mu_a'");
    if (has_mu) return cv.get<double>("mu");
    double mua = cv.get<double>("mu_a");
    if (!(alpha > 0.0)) throw std::invalid_argument("config: mu_a requires alpha > 0");
    return mua / alpha;
}

// ------------------------------------------------------------- simulate-*

int cmd_simulate_cdma(ConfigView& cv, RunContext& ctx) {
    long long n = cv.get<long long>("n");
    long long L = cv.get<long long>("L");
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    int omega = cv.get_or<int>("omega", 1);
    int lambda = cv.get_or<int>("lambda", 1);
    DenoiserKind kind = parse_cdma_denoiser(cv.get<std::string>("denoiser"),
                                            cv.get_or<double>("alpha_hat", -1.0));
    long long trials = cv.get<long long>("trials");
    MatrixSEOptions opts;
    opts.mc_samples = cv.get_or<int>("se_mc_samples", opts.mc_samples);
    opts.tol = cv.get_or<double>("se_tol", opts.tol);
    opts.t_max = cv.get_or<int>("t_max", opts.t_max);
    cv.finish();

    CouplingSpec spec = CouplingSpec::omega_lambda(omega, lambda);
    CsvWriter csv({"seed", "EbN0_dB", "L", "k", "alpha", "omega", "lambda", "denoiser",
                   "t_final", "p_md", "p_fa", "p_aue", "combined"});
    csv.comment(ctx.echo());

    // one SE trace per SNR point; fixed substream gives CRN across the sweep
    std::vector<SystemConfig> cfgs;
    std::vector<MatrixSETrace> traces;
    for (double db : grid) {
        SystemConfig cfg = SystemConfig::dimensioned(n, L, k, alpha, db);
        Rng se_rng(ctx.seed, 0xCD5E);
        traces.push_back(se_fixed_point(cfg, spec, kind, opts, se_rng));
        cfgs.push_back(cfg);
    }

    struct Row { std::size_t idx; ErrorTriple e; int t_final; };
    std::vector<Row> rows(grid.size() * trials);
    parallel_for(rows.size(), ctx.threads, [&](std::size_t task) {
        std::size_t e = task / trials, i = task % trials;
        const MatrixSETrace& tr = traces[e];
        Rng trial_rng = Rng(ctx.seed, 0x7254).substream(task);
        CdmaInstance inst = sample_cdma_instance(cfgs[e], spec, trial_rng);
        CdmaAmpState st = cdma_amp_init(inst, k);
        for (int t = 0; t <= tr.t_final; ++t)
            cdma_amp_step(st, inst, spec, tr, kind, cfgs[e]);
        Eigen::MatrixXd Xhat = cdma_amp_decide(st, spec, tr, kind, cfgs[e]);
        rows[task] = {task, empirical_errors(inst.X, Xhat), tr.t_final};
    });
    for (std::size_t task = 0; task < rows.size(); ++task) {
        std::size_t e = task / trials;
        const Row& r = rows[task];
        csv.add_row({std::to_string(ctx.seed), format_double(grid[e]), std::to_string(L),
                     std::to_string(k), format_double(alpha), std::to_string(omega),
                     std::to_string(lambda), to_string(kind.kind), std::to_string(r.t_final),
                     format_double(r.e.p_md), format_double(r.e.p_fa), format_double(r.e.p_aue),
                     format_double(r.e.combined())});
    }
    csv.write(ctx.out_dir / "simulate-cdma.csv");
    return 0;
}

int cmd_simulate_sparc(ConfigView& cv, RunContext& ctx) {
    long long n = cv.get<long long>("n");
    long long L = cv.get<long long>("L");
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    int omega = cv.get_or<int>("omega", 1);
    int lambda = cv.get_or<int>("lambda", 1);
    SparcDenoiser kind = parse_sparc_denoiser(cv.get<std::string>("denoiser"));
    long long trials = cv.get<long long>("trials");
    ScalarSEOptions opts;
    opts.mc_samples = cv.get_or<int>("se_mc_samples", opts.mc_samples);
    opts.tol = cv.get_or<double>("se_tol", opts.tol);
    opts.t_max = cv.get_or<int>("t_max", opts.t_max);
    cv.finish();

    CouplingSpec spec = CouplingSpec::omega_lambda(omega, lambda);
    CsvWriter csv({"seed", "EbN0_dB", "L", "k", "alpha", "omega", "lambda", "denoiser",
                   "t_final", "p_md", "p_fa", "p_aue", "combined", "scheme"});
    csv.comment(ctx.echo());

    std::vector<SystemConfig> cfgs;
    std::vector<ScalarSETrace> traces;
    for (double db : grid) {
        SystemConfig cfg = SystemConfig::dimensioned(n, L, k, alpha, db);
        Rng se_rng(ctx.seed, 0x5A5E);
        traces.push_back(scalar_se_run(cfg, spec, kind, opts, se_rng));
        cfgs.push_back(cfg);
    }

    struct Row { ErrorTriple e; int t_final; };
    std::vector<Row> rows(grid.size() * trials);
    parallel_for(rows.size(), ctx.threads, [&](std::size_t task) {
        std::size_t e = task / trials;
        const ScalarSETrace& tr = traces[e];
        Rng trial_rng = Rng(ctx.seed, 0x7255).substream(task);
        SparcInstance inst = sample_sparc_instance(cfgs[e], spec, trial_rng);
        SparcAmpState st = sparc_amp_init(inst);
        for (int t = 0; t <= tr.t_final; ++t)
            sparc_amp_step(st, inst, spec, tr, kind, cfgs[e]);
        auto decided = sparc_amp_decide(st, spec, tr, cfgs[e]);
        rows[task] = {sparc_empirical_errors(inst.sent, decided), tr.t_final};
    });
    for (std::size_t task = 0; task < rows.size(); ++task) {
        std::size_t e = task / trials;
        const Row& r = rows[task];
        csv.add_row({std::to_string(ctx.seed), format_double(grid[e]), std::to_string(L),
                     std::to_string(k), format_double(alpha), std::to_string(omega),
                     std::to_string(lambda), to_string(kind), std::to_string(r.t_final),
                     format_double(r.e.p_md), format_double(r.e.p_fa), format_double(r.e.p_aue),
                     format_double(r.e.combined()), "sparc"});
    }
    csv.write(ctx.out_dir / "simulate-sparc.csv");
    return 0;
}

// ------------------------------------------------------------------- se-*

int cmd_se_cdma(ConfigView& cv, RunContext& ctx) {
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    double mu = resolve_mu(cv, alpha);
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    int omega = cv.get_or<int>("omega", 1);
    int lambda = cv.get_or<int>("lambda", 1);
    DenoiserKind kind = parse_cdma_denoiser(cv.get<std::string>("denoiser"),
                                            cv.get_or<double>("alpha_hat", -1.0));
    MatrixSEOptions opts;
    opts.mc_samples = cv.get_or<int>("mc_samples", opts.mc_samples);
    opts.tol = cv.get_or<double>("tol", opts.tol);
    opts.t_max = cv.get_or<int>("t_max", opts.t_max);
    opts.predict_samples = cv.get_or<int>("predict_samples", opts.predict_samples);
    cv.finish();

    CouplingSpec spec = CouplingSpec::omega_lambda(omega, lambda);
    CsvWriter traj({"EbN0_dB", "t", "block", "trace_Psi", "trace_T"});
    traj.comment(ctx.echo());
    CsvWriter pred({"EbN0_dB", "denoiser", "alpha", "k", "mu_a", "t_final", "p_md", "p_fa",
                    "p_aue", "combined", "se_md", "se_fa", "se_aue"});
    pred.comment(ctx.echo());

    struct Point { MatrixSETrace tr; PredictedErrors pe; };
    std::vector<Point> pts(grid.size());
    parallel_for(grid.size(), ctx.threads, [&](std::size_t e) {
        SystemConfig cfg = SystemConfig::asymptotic(mu, k, alpha, grid[e]);
        Rng rng(ctx.seed, 0xCD5E);
        pts[e].tr = se_fixed_point(cfg, spec, kind, opts, rng);
        Rng prng(ctx.seed, 0xCD5F);
        pts[e].pe = predict_errors_detailed(pts[e].tr, pts[e].tr.t_final, cfg, kind, opts, prng);
    });
    for (std::size_t e = 0; e < grid.size(); ++e) {
        const auto& tr = pts[e].tr;
        for (int t = 0; t <= tr.t_final; ++t)
            for (int c = 0; c < spec.C(); ++c)
                traj.add_row({format_double(grid[e]), std::to_string(t), std::to_string(c),
                              format_double(tr.Psi[t + 1][c].trace()),
                              format_double(tr.T[t][c].trace())});
        const auto& pe = pts[e].pe;
        pred.add_row({format_double(grid[e]), to_string(kind.kind), format_double(alpha),
                      std::to_string(k), format_double(alpha * mu),
                      std::to_string(pts[e].tr.t_final), format_double(pe.mean.p_md),
                      format_double(pe.mean.p_fa), format_double(pe.mean.p_aue),
                      format_double(pe.mean.combined()), format_double(pe.std_err.p_md),
                      format_double(pe.std_err.p_fa), format_double(pe.std_err.p_aue)});
    }
    traj.write(ctx.out_dir / "se-cdma-trajectory.csv");
    pred.write(ctx.out_dir / "se-cdma-predictions.csv");
    return 0;
}

int cmd_se_sparc(ConfigView& cv, RunContext& ctx) {
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    double mu = resolve_mu(cv, alpha);
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    int omega = cv.get_or<int>("omega", 1);
    int lambda = cv.get_or<int>("lambda", 1);
    SparcDenoiser kind = parse_sparc_denoiser(cv.get<std::string>("denoiser"));
    ScalarSEOptions opts;
    opts.mc_samples = cv.get_or<int>("mc_samples", opts.mc_samples);
    opts.tol = cv.get_or<double>("tol", opts.tol);
    opts.t_max = cv.get_or<int>("t_max", opts.t_max);
    cv.finish();

    CouplingSpec spec = CouplingSpec::omega_lambda(omega, lambda);
    CsvWriter traj({"EbN0_dB", "t", "block", "psi", "tau"});
    traj.comment(ctx.echo());
    CsvWriter fixp({"EbN0_dB", "denoiser", "t_final", "nmse"});
    fixp.comment(ctx.echo());

    std::vector<ScalarSETrace> traces(grid.size());
    parallel_for(grid.size(), ctx.threads, [&](std::size_t e) {
        SystemConfig cfg = SystemConfig::asymptotic(mu, k, alpha, grid[e]);
        Rng rng(ctx.seed, 0x5A5E);
        traces[e] = scalar_se_run(cfg, spec, kind, opts, rng);
    });
    for (std::size_t e = 0; e < grid.size(); ++e) {
        SystemConfig cfg = SystemConfig::asymptotic(mu, k, alpha, grid[e]);
        const auto& tr = traces[e];
        for (int t = 0; t <= tr.t_final; ++t)
            for (int c = 0; c < spec.C(); ++c)
                traj.add_row({format_double(grid[e]), std::to_string(t), std::to_string(c),
                              format_double(tr.psi[t + 1](c)), format_double(tr.tau[t](c))});
        fixp.add_row({format_double(grid[e]), to_string(kind), std::to_string(tr.t_final),
                      format_double(tr.psi.back().maxCoeff() / cfg.E())});
    }
    traj.write(ctx.out_dir / "se-sparc-trajectory.csv");
    fixp.write(ctx.out_dir / "se-sparc-fixedpoint.csv");
    return 0;
}

// ------------------------------------------------------- potential, bounds

int cmd_potential(ConfigView& cv, RunContext& ctx) {
    PotentialKind kind = parse_kind(cv.get<std::string>("kind"));
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    double mu = resolve_mu(cv, alpha);
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    PotentialOptions opts;
    opts.grid = cv.get_or<int>("grid", opts.grid);
    opts.mc_samples = cv.get_or<int>("mc_samples", opts.mc_samples);
    opts.seed = ctx.seed;
    opts.threads = ctx.threads;
    cv.finish();

    CsvWriter curve({"EbN0_dB", "kind", "psi", "psi_over_E", "F"});
    curve.comment(ctx.echo());
    CsvWriter mins({"EbN0_dB", "kind", "psi_over_E", "F", "is_largest_global"});
    mins.comment(ctx.echo());

    for (double db : grid) {
        SystemConfig cfg = SystemConfig::asymptotic(mu, k, alpha, db);
        std::unique_ptr<BayesMiSampler> sampler;
        if (kind == PotentialKind::bayes) {
            sampler = std::make_unique<BayesMiSampler>(k, opts);
            sampler->ensure_precision(cfg.sigma2 + mu * cfg.E() / 2.0, cfg.E(), alpha);
        }
        PotentialEval ev = evaluate_potential(kind, mu, cfg.sigma2, cfg, opts, sampler.get());
        for (std::size_t i = 0; i < ev.psi_grid.size(); ++i)
            curve.add_row({format_double(db), to_string(kind), format_double(ev.psi_grid[i]),
                           format_double(ev.psi_grid[i] / cfg.E()), format_double(ev.values[i])});
        auto lm = local_minimizers(kind, mu, cfg.sigma2, cfg, opts, sampler.get());
        for (const auto& m : lm)
            mins.add_row({format_double(db), to_string(kind), format_double(m.psi / cfg.E()),
                          format_double(m.value),
                          std::fabs(m.psi - ev.minimizer) < 1e-9 * cfg.E() ? "1" : "0"});
    }
    curve.write(ctx.out_dir / "potential-curve.csv");
    mins.write(ctx.out_dir / "potential-minimizers.csv");
    return 0;
}

int cmd_asymptotic_bounds(ConfigView& cv, RunContext& ctx) {
    PotentialKind kind = parse_kind(cv.get<std::string>("kind"));
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    double mu = resolve_mu(cv, alpha);
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    PotentialOptions opts;
    opts.grid = cv.get_or<int>("grid", opts.grid);
    opts.mc_samples = cv.get_or<int>("mc_samples", opts.mc_samples);
    opts.seed = ctx.seed;
    double theta = 1.0;
    bool heuristic = false;
    if (cv.has("omega") || cv.has("lambda")) {
        int omega = cv.get<int>("omega");
        int lambda = cv.get<int>("lambda");
        theta = CouplingSpec::omega_lambda(omega, lambda).theta();
        heuristic = true;
    }
    cv.finish();

    CsvWriter csv({"EbN0_dB", "kind", "alpha", "k", "mu", "mu_a", "theta", "eps_md", "eps_fa",
                   "eps_aue", "combined"});
    csv.comment(ctx.echo());
    if (heuristic)
        csv.comment("finite (omega,Lambda): no Lemma-3 guarantee at this size; heuristic");

    std::vector<std::array<double, 4>> vals(grid.size());
    parallel_for(grid.size(), ctx.threads, [&](std::size_t e) {
        SystemConfig cfg = SystemConfig::asymptotic(mu, k, alpha, grid[e]);
        PotentialOptions inner = opts;
        inner.threads = 1;
        std::unique_ptr<BayesMiSampler> sampler;
        if (kind == PotentialKind::bayes) sampler = std::make_unique<BayesMiSampler>(k, inner);
        double mu_in = theta * mu;
        double m = largest_minimizer(kind, mu_in, cfg.sigma2, cfg, inner, sampler.get());
        double tau_bar = cfg.sigma2 + mu_in * m;
        if (alpha >= 1.0) {
            double pupe = pupe_alpha1(tau_bar, cfg);
            vals[e] = {0.0, 0.0, pupe, pupe};
        } else {
            ErrorTriple t = asymptotic_error_triple(tau_bar, cfg);
            vals[e] = {t.p_md, t.p_fa, t.p_aue, t.combined()};
        }
    });
    for (std::size_t e = 0; e < grid.size(); ++e)
        csv.add_row({format_double(grid[e]), to_string(kind), format_double(alpha),
                     std::to_string(k), format_double(mu), format_double(alpha * mu),
                     format_double(theta), format_double(vals[e][0]), format_double(vals[e][1]),
                     format_double(vals[e][2]), format_double(vals[e][3])});
    csv.write(ctx.out_dir / "asymptotic-bounds.csv");
    return 0;
}

int cmd_finite_bounds(ConfigView& cv, RunContext& ctx) {
    long long n = cv.get<long long>("n");
    long long L = cv.get<long long>("L");
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    long long rl = cv.get<long long>("rl");
    long long ru = cv.get<long long>("ru");
    std::string policy = cv.get_or<std::string>("pprime_policy", "fixed");
    double frac = cv.get_or<double>("pprime_frac", 0.8);
    ActivityModel act = ActivityModel::binomial(alpha, L);
    long long kl, ku;
    if (cv.has("kl") || cv.has("ku")) {
        kl = cv.get<long long>("kl");
        ku = cv.get<long long>("ku");
    } else {
        double pbar = cv.get_or<double>("pbar", 1e-6);
        std::tie(kl, ku) = act.choose_range(pbar);
    }
    cv.finish();
    if (policy != "fixed" && policy != "golden")
        throw std::invalid_argument("pprime_policy: expected fixed|golden");

    CsvWriter csv({"ebn0_dB", "L", "n", "k", "alpha", "rl", "ru", "kl", "ku", "pprime_policy",
                   "eps_md", "eps_fa", "eps_aue", "bar_md", "bar_fa", "bar_aue",
                   "wall_seconds"});
    csv.comment(ctx.echo());

    struct Out { BoundTriple b, f; double wall; };
    std::vector<Out> outs(grid.size());
    parallel_for(grid.size(), ctx.threads, [&](std::size_t e) {
        auto t0 = std::chrono::steady_clock::now();
        FiniteBoundConfig fbc;
        fbc.cfg = SystemConfig::dimensioned(n, L, k, alpha, grid[e]);
        fbc.activity = act;
        fbc.kl = kl;
        fbc.ku = ku;
        fbc.rl = rl;
        fbc.ru = ru;
        fbc.pprime = frac * fbc.P();
        BoundTriple b;
        if (policy == "golden") b = optimize_pprime(fbc);
        else b = compute_bound_triple(fbc);
        BoundTriple f = compute_error_floors(fbc);
        outs[e] = {b, f,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    });
    for (std::size_t e = 0; e < grid.size(); ++e)
        csv.add_row({format_double(grid[e]), std::to_string(L), std::to_string(n),
                     std::to_string(k), format_double(alpha), std::to_string(rl),
                     std::to_string(ru), std::to_string(kl), std::to_string(ku), policy,
                     format_double(outs[e].b.md), format_double(outs[e].b.fa),
                     format_double(outs[e].b.aue), format_double(outs[e].f.md),
                     format_double(outs[e].f.fa), format_double(outs[e].f.aue),
                     format_double(outs[e].wall)});
    csv.write(ctx.out_dir / "finite-bounds.csv");
    return 0;
}

int cmd_sweep_region(ConfigView& cv, RunContext& ctx) {
    PotentialKind kind = parse_kind(cv.get<std::string>("kind"));
    int k = cv.get<int>("k");
    double alpha = cv.get<double>("alpha");
    double target = cv.get<double>("target");
    auto grid = parse_grid(cv.get<json>("ebn0_db"));
    double mu_lo = cv.get_or<double>("mu_lo", 1e-4);
    double mu_hi = cv.get_or<double>("mu_hi", 20.0);
    PotentialOptions opts;
    opts.grid = cv.get_or<int>("grid", opts.grid);
    opts.mc_samples = cv.get_or<int>("mc_samples", opts.mc_samples);
    opts.seed = ctx.seed;
    opts.threads = ctx.threads;
    double theta = 1.0;
    if (cv.has("omega") || cv.has("lambda"))
        theta = CouplingSpec::omega_lambda(cv.get<int>("omega"), cv.get<int>("lambda")).theta();
    cv.finish();

    SystemConfig tmpl = SystemConfig::asymptotic(1.0, k, alpha, grid[0]);
    auto pts = sweep_achievable_region(tmpl, target, grid, mu_lo, mu_hi, kind, opts, theta);

    CsvWriter csv({"ebn0_dB", "mu_a_max", "kind", "alpha", "k", "target", "bracketed"});
    csv.comment(ctx.echo());
    for (const auto& p : pts)
        csv.add_row({format_double(p.ebn0_db), format_double(p.mu_a_max), to_string(kind),
                     format_double(alpha), std::to_string(k), format_double(target),
                     p.bracketed ? "1" : "0"});
    csv.write(ctx.out_dir / "sweep-region.csv");
    return 0;
}

}  // namespace

int run_config(const std::string& command, const json& config, const RunOverrides& overrides) {
    RunContext ctx;
    ctx.seed = overrides.seed.value_or(config.value("seed", 1ULL));
    ctx.out_dir = overrides.out_dir.value_or(config.value("out", std::string(".")));
    ctx.threads = overrides.threads.value_or(default_threads());
    if (config.contains("command") && config.at("command").get<std::string>() != command)
        throw std::invalid_argument("config: 'command' does not match the CLI subcommand");
    fs::create_directories(ctx.out_dir);
    ctx.resolved = config;
    ctx.resolved["command"] = command;
    ctx.resolved["seed"] = ctx.seed;
    ctx.resolved.erase("out");

    ConfigView cv(config);
    int rc;
    if (command == "simulate-cdma") rc = cmd_simulate_cdma(cv, ctx);
    else if (command == "simulate-sparc") rc = cmd_simulate_sparc(cv, ctx);
    else if (command == "se-cdma") rc = cmd_se_cdma(cv, ctx);
    else if (command == "se-sparc") rc = cmd_se_sparc(cv, ctx);
    else if (command == "potential") rc = cmd_potential(cv, ctx);
    else if (command == "asymptotic-bounds") rc = cmd_asymptotic_bounds(cv, ctx);
    else if (command == "finite-bounds") rc = cmd_finite_bounds(cv, ctx);
    else if (command == "sweep-region") rc = cmd_sweep_region(cv, ctx);
    else throw std::invalid_argument("unknown command: " + command);
    ctx.write_sidecar(command);
    return rc;
}

int run_from_file(const std::string& command, const std::string& config_path,
                  const RunOverrides& overrides) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    json config;
    try {
        config = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config parse error at byte " + std::to_string(e.byte) +
                                    ": " + e.what());
    }
    return run_config(command, config, overrides);
}

void aggregate_csvs(const std::vector<std::string>& inputs, const std::string& out_path) {
    if (inputs.empty()) throw std::invalid_argument("aggregate: no input files");
    static const std::set<std::string> metric_cols = {"p_md", "p_fa", "p_aue", "combined"};
    static const std::set<std::string> ignored = {"seed", "t_final"};

    CsvTable first = read_csv(inputs[0]);
    std::vector<std::string> group_cols, metrics;
    for (const auto& h : first.header) {
        if (metric_cols.count(h)) metrics.push_back(h);
        else if (!ignored.count(h)) group_cols.push_back(h);
    }
    if (metrics.empty()) throw std::invalid_argument("aggregate: no metric columns found");

    std::map<std::string, std::map<std::string, std::vector<double>>> groups;
    std::map<std::string, std::vector<std::string>> group_key_cells;
    for (const auto& path : inputs) {
        CsvTable t = read_csv(path);
        if (t.header != first.header)
            throw std::invalid_argument("aggregate: schema mismatch in " + path);
        std::vector<int> gidx, midx;
        for (const auto& c : group_cols) gidx.push_back(t.column(c));
        for (const auto& c : metrics) midx.push_back(t.column(c));
        for (const auto& row : t.rows) {
            std::string key;
            std::vector<std::string> cells;
            for (int i : gidx) {
                key += row[i];
                key += '\x1f';
                cells.push_back(row[i]);
            }
            group_key_cells.emplace(key, cells);
            for (std::size_t m = 0; m < metrics.size(); ++m)
                groups[key][metrics[m]].push_back(std::stod(row[midx[m]]));
        }
    }

    std::vector<std::string> header = group_cols;
    header.push_back("n_trials");
    for (const auto& m : metrics) {
        header.push_back("mean_" + m);
        header.push_back("se_" + m);
    }
    CsvWriter out(header);
    for (const auto& [key, per_metric] : groups) {
        std::vector<std::string> row = group_key_cells.at(key);
        std::size_t n = per_metric.begin()->second.size();
        row.push_back(std::to_string(n));
        for (const auto& m : metrics) {
            const auto& v = per_metric.at(m);
            double mean = pairwise_sum(v) / v.size();
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            double se = v.size() > 1 ? std::sqrt(var / (v.size() - 1.0) / v.size()) : 0.0;
            row.push_back(format_double(mean));
            row.push_back(format_double(se));
        }
        out.add_row(row);
    }
    out.write(out_path);
}

}  // namespace maclab
