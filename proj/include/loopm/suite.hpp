#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "loopm/chain.hpp"
#include "loopm/generator.hpp"
#include "loopm/io.hpp"
#include "loopm/levy.hpp"
#include "loopm/mc_oracle.hpp"
#include "loopm/moments.hpp"
#include "loopm/norms.hpp"
#include "loopm/perturbation.hpp"
#include "loopm/sampler.hpp"

namespace loopm {

struct McParams {
    long samples = 20000;
    double window_lo = 0.0;  // 0 -> default window from the spectral abscissa
    double window_hi = 0.0;
    std::uint64_t seed = 7;
};

struct Tolerances {
    double identity = 1e-10;
    double derivative = 1e-6;
    double sqrt_kernel = 1e-8;
    double semigroup = 1e-6;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    int instances = 20;
    GeneratorParams generator;
    std::vector<std::string> checks;
    McParams mc;
    Tolerances tol;
    std::string out_dir;
};

inline ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig cfg;
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.instances = j.value("instances", 20);
    if (cfg.instances < 0) throw ConfigInvalid("instances must be >= 0");
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        cfg.generator.n = g.value("n", 6);
        cfg.generator.density = g.value("density", 0.6);
        cfg.generator.symmetric = g.value("symmetric", false);
    }
    if (j.contains("checks"))
        cfg.checks = j["checks"].get<std::vector<std::string>>();
    if (j.contains("mc")) {
        const auto& m = j["mc"];
        cfg.mc.samples = m.value("samples", 20000L);
        if (m.contains("window")) {
            cfg.mc.window_lo = m["window"].at(0).get<double>();
            cfg.mc.window_hi = m["window"].at(1).get<double>();
        }
        cfg.mc.seed = m.value("seed", std::uint64_t{7});
    }
    if (j.contains("tolerances")) {
        const auto& t = j["tolerances"];
        cfg.tol.identity = t.value("identity", 1e-10);
        cfg.tol.derivative = t.value("derivative", 1e-6);
        cfg.tol.sqrt_kernel = t.value("sqrt", 1e-8);
        cfg.tol.semigroup = t.value("semigroup", 1e-6);
        if (cfg.tol.identity <= 0 || cfg.tol.derivative <= 0 ||
            cfg.tol.sqrt_kernel <= 0 || cfg.tol.semigroup <= 0)
            throw ConfigInvalid("tolerances must be > 0");
    }
    cfg.out_dir = j.value("out", std::string{});
    return cfg;
}

struct CheckRecord {
    std::string name;
    std::string anchor;  // which identity/theorem the record verifies
    std::uint64_t seed = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_error = 0.0;
    bool pass = true;
};

struct RunReport {
    std::vector<CheckRecord> records;
    int n_pass = 0;
    int n_fail = 0;
    bool overall = true;
    Json config_echo;

    void add(CheckRecord rec) {
        rec.pass ? ++n_pass : ++n_fail;
        overall = overall && rec.pass;
        records.push_back(std::move(rec));
    }
};

inline double chi_square_critical(int dof, double alpha) {
    return boost::math::quantile(boost::math::chi_squared(dof), 1.0 - alpha);
}

namespace detail {

inline bool wants(const ExperimentConfig& cfg, const std::string& group) {
    return std::find(cfg.checks.begin(), cfg.checks.end(), group) !=
           cfg.checks.end();
}

inline CheckRecord error_check(std::string name, std::string anchor,
                               std::uint64_t seed, double error, double tol) {
    return CheckRecord{std::move(name), std::move(anchor), seed,
                       error,           tol,               error,
                       error <= tol};
}

// A thrown module error becomes one failed record; the remaining instances
// still run.
template <typename Fn>
void guarded(RunReport& report, const char* group, std::uint64_t seed,
             Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        report.add(CheckRecord{std::string(group) + "-error",
                               std::string("error: ") + e.what(), seed, 0.0,
                               0.0, 1.0, false});
    }
}

inline void run_identities(const ExperimentConfig& cfg, RunReport& report) {
    for (int i = 0; i < cfg.instances; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        guarded(report, "identities", seed, [&] {
        Splitmix64 rng(seed, 0x1de0u);
        const TransientChain chain =
            generate_random_chain(cfg.generator, seed);
        const GreenKernel g = green_kernel(chain);
        const Vector& m = chain.reference();

        {
            const double t = rng.uniform(0.1, 2.0);
            const double s = rng.uniform(0.1, 2.0);
            const Matrix lhs = transition_density(chain, t + s);
            const Matrix rhs = transition_density(chain, t) * m.asDiagonal() *
                               transition_density(chain, s);
            report.add(error_check("semigroup-property", "semigroup-composition",
                                   seed, (lhs - rhs).cwiseAbs().maxCoeff(),
                                   cfg.tol.identity));
        }
        {
            const Matrix resid =
                (-chain.rates()) * (g.u * m.asDiagonal()) -
                Matrix::Identity(chain.size(), chain.size());
            report.add(error_check("green-generator-inverse",
                                   "potential-density-solve", seed,
                                   resid.cwiseAbs().maxCoeff(),
                                   cfg.tol.identity));
        }
        for (int k = 1; k <= 3; ++k) {
            const CafProductSpec spec = generate_random_spec(chain.size(), k, rng);
            const RevuzMeasure nu = generate_random_measure(chain.size(), rng);
            const InsertionReport ir = insertion_identity_check(g, spec, nu);
            report.add(error_check("insertion-identity-k" + std::to_string(k),
                                   "caf-insertion-identity", seed,
                                   ir.rel_error, cfg.tol.identity));
        }
        {
            Vector a(chain.size());
            for (int x = 0; x < chain.size(); ++x) a[x] = rng.uniform(0.5, 2.0);
            const TimeChangeReport tc = time_change_check(chain, a);
            report.add(error_check("time-change-identity",
                                   "time-change-potential", seed,
                                   tc.max_rel_error, cfg.tol.identity));
        }
        {
            GeneratorParams dual_params = cfg.generator;
            dual_params.dual_admissible = true;
            const TransientChain dc = generate_random_chain(dual_params, seed);
            const TransientChain dual = dual_chain(dc);
            double worst = 0.0;
            for (int rep_t = 0; rep_t < 5; ++rep_t) {
                const double t = rng.uniform(0.1, 2.0);
                const Matrix fwd = transition_density(dc, t);
                const Matrix bwd = transition_density(dual, t);
                worst = std::max(worst,
                                 (bwd - fwd.transpose()).cwiseAbs().maxCoeff());
            }
            report.add(error_check("dual-kernel-transpose",
                                   "dual-transition-density", seed, worst,
                                   cfg.tol.identity));
        }
        {
            GeneratorParams sym_params = cfg.generator;
            sym_params.symmetric = true;
            const TransientChain sc = generate_random_chain(sym_params, seed);
            const GreenKernel sg = green_kernel(sc);
            const SqrtKernel sk = sqrt_kernel(sc);
            const Matrix resid =
                sk.w * Matrix(sc.reference().asDiagonal()) * sk.w - sg.u;
            const double scale = sg.u.cwiseAbs().maxCoeff();
            report.add(error_check("sqrt-kernel-square", "w-square-equals-u",
                                   seed,
                                   resid.cwiseAbs().maxCoeff() / scale,
                                   cfg.tol.sqrt_kernel));
        }
        });
    }
}

inline void run_norms(const ExperimentConfig& cfg, RunReport& report) {
    const int count = std::min(cfg.instances, 10);
    for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        guarded(report, "norms", seed, [&] {
        GeneratorParams sym_params = cfg.generator;
        sym_params.symmetric = true;
        const TransientChain sc = generate_random_chain(sym_params, seed);
        const NormCertificate w_cert = w_norm_certificate(sc, 50, 4, seed);
        report.add(CheckRecord{"proper-norm-w", "w-norm-cyclic-bound", seed,
                               w_cert.c_observed, 1.0 + 1e-8,
                               std::max(0.0, w_cert.c_observed - 1.0),
                               w_cert.c_observed <= 1.0 + 1e-8});

        const TransientChain chain = generate_random_chain(cfg.generator, seed);
        const NormCertificate u_cert =
            u2inf_norm_certificate(chain, 50, 4, seed);
        report.add(CheckRecord{"proper-norm-u2inf", "u2inf-norm-cyclic-bound",
                               seed, u_cert.c_observed, u_cert.c_observed, 0.0,
                               true});

        const LevyTorusModel model = generate_random_levy_model(1, 8, seed);
        const NormCertificate p_cert = psi_norm_certificate(model, 50, 4, seed);
        report.add(CheckRecord{"proper-norm-psi", "psi-norm-cyclic-bound", seed,
                               p_cert.c_observed, p_cert.c_observed, 0.0,
                               true});
        });
    }
}

inline void run_killing(const ExperimentConfig& cfg, RunReport& report) {
    for (int i = 0; i < cfg.instances; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        guarded(report, "killing", seed, [&] {
        Splitmix64 rng(seed, 0x4a11u);
        const TransientChain chain = generate_random_chain(cfg.generator, seed);
        const int k = 1 + i % 3;
        const CafProductSpec spec = generate_random_spec(chain.size(), k, rng);
        const RevuzMeasure nu = generate_random_measure(chain.size(), rng);
        const PerturbationReport rep =
            killing_derivative(chain, nu, spec, {}, cfg.tol.derivative);
        report.add(error_check("killing-derivative-forms",
                               "killing-derivative-bridge-form", seed,
                               rep.form_agreement, 1e-10));
        report.add(error_check("killing-derivative-fd",
                               "killing-derivative-theorem", seed,
                               rep.rel_error, cfg.tol.derivative));
        for (double eps : {1e-1, 1e-2}) {
            const RemainderCheck rc =
                killing_remainder_check(chain, nu, spec, eps);
            char name[64];
            std::snprintf(name, sizeof name, "second-order-remainder-%g", eps);
            report.add(CheckRecord{name, "exponential-remainder-bound", seed,
                                   rc.lhs, rc.rhs,
                                   rc.rhs > 0 ? rc.lhs / rc.rhs : 0.0,
                                   rc.pass});
        }
        });
    }
}

inline void run_levy(const ExperimentConfig& cfg, RunReport& report) {
    static const std::pair<int, int> shapes[] = {{1, 4}, {1, 8}, {1, 16}, {2, 8}};
    for (int i = 0; i < cfg.instances; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        guarded(report, "levy", seed, [&] {
        const auto [d, n] = shapes[i % 4];
        const LevyTorusModel model = generate_random_levy_model(d, n, seed);
        Splitmix64 rng(seed, 0x1e51u);
        const int k = 1 + i % 2;
        const CafProductSpec spec =
            generate_random_spec(static_cast<int>(model.points()), k, rng);
        const PerturbationReport rep =
            levy_derivative(model, spec, {}, cfg.tol.derivative);
        report.add(error_check("levy-derivative-forms",
                               "levy-derivative-fourier-form", seed,
                               rep.form_agreement, 1e-10));
        report.add(error_check("levy-derivative-fd", "levy-derivative-theorem",
                               seed, rep.rel_error, cfg.tol.derivative));
        });
    }
}

inline void run_jump(const ExperimentConfig& cfg, RunReport& report) {
    for (int i = 0; i < cfg.instances; ++i) {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
        guarded(report, "jump", seed, [&] {
        Splitmix64 rng(seed, 0x90a7u);
        GeneratorParams params = cfg.generator;
        params.dual_admissible = true;
        const TransientChain chain = generate_random_chain(params, seed);
        const JumpPerturbation jp = make_jump_perturbation(
            chain, generate_random_jump_intensity(chain.size(), rng));
        const int k = 1 + i % 3;
        const CafProductSpec spec = generate_random_spec(chain.size(), k, rng);

        const PerturbationReport rep =
            jump_derivative(chain, jp, spec, {}, cfg.tol.derivative);
        report.add(error_check("jump-derivative-forms",
                               "jump-derivative-kernel-form", seed,
                               rep.form_agreement, 1e-10));
        report.add(error_check("jump-derivative-fd", "jump-derivative-theorem",
                               seed, rep.rel_error, cfg.tol.derivative));

        const JumpPotential jpot = jump_perturbed_potential(chain, jp, 0.05);
        const double scale = jpot.direct.cwiseAbs().maxCoeff();
        report.add(error_check(
            "neumann-vs-direct", "jump-resolvent-series", seed,
            (jpot.direct - jpot.series).cwiseAbs().maxCoeff() / scale,
            cfg.tol.identity));
        report.add(error_check(
            "neumann-tail-ratio", "jump-series-geometric-tail", seed,
            std::abs(jpot.tail_ratio - jpot.spectral_radius) /
                jpot.spectral_radius,
            0.1));

        const DualCheckReport dual = jump_dual_check(chain, jp, 0.05);
        report.add(error_check("jump-dual-kernel", "jump-dual-potential", seed,
                               dual.max_rel_error, cfg.tol.identity));

        const SemigroupCheckReport sg =
            jump_semigroup_check(chain, jp, 0.1, 1.0, cfg.tol.semigroup);
        report.add(error_check("jump-semigroup-expansion",
                               "jump-semigroup-series", seed, sg.max_abs_error,
                               cfg.tol.semigroup));
        });
    }
}

inline void run_mc(const ExperimentConfig& cfg, RunReport& report) {
    const std::uint64_t seed = cfg.seed;
    guarded(report, "mc", seed, [&] {
    GeneratorParams params = cfg.generator;
    params.n = std::min(params.n, 4);
    const TransientChain chain = generate_random_chain(params, seed);
    RestrictedLoopMeasureSpec spec =
        (cfg.mc.window_hi > 0.0)
            ? RestrictedLoopMeasureSpec(chain, cfg.mc.window_lo,
                                        cfg.mc.window_hi)
            : RestrictedLoopMeasureSpec::with_default_window(chain);
    const LoopSampler sampler(spec);
    Splitmix64 rng(seed, 0xabcdu);
    const RevuzMeasure nu1 = generate_random_measure(chain.size(), rng);
    const RevuzMeasure nu2 = generate_random_measure(chain.size(), rng);

    {
        const McEstimate est =
            estimate_restricted_moment(sampler, {nu1}, cfg.mc.samples,
                                       cfg.mc.seed);
        const double oracle = restricted_moment_oracle_k1(spec, nu1);
        report.add(CheckRecord{"mc-restricted-k1", "restricted-loop-moment",
                               seed, est.estimate, oracle,
                               std::abs(est.estimate - oracle) /
                                   std::abs(oracle),
                               std::abs(est.estimate - oracle) <=
                                   3.0 * est.stderr_});
    }
    {
        const McEstimate est = estimate_restricted_moment(
            sampler, {nu1, nu2}, cfg.mc.samples, cfg.mc.seed + 1);
        const double oracle = restricted_moment_oracle_k2(spec, nu1, nu2);
        report.add(CheckRecord{"mc-restricted-k2", "restricted-loop-moment",
                               seed, est.estimate, oracle,
                               std::abs(est.estimate - oracle) /
                                   std::abs(oracle),
                               std::abs(est.estimate - oracle) <=
                                   3.0 * est.stderr_});
    }
    {
        // Two independent halves: base states of raw loops vs base states
        // after a uniform-time rotation.  Rotation invariance of the loop
        // measure makes both marginals equal.
        const long n = std::min<long>(cfg.mc.samples, 20000);
        std::vector<long> pre(chain.size(), 0), post(chain.size(), 0);
        long n_pre = 0, n_post = 0;
        for (long i = 0; i < n; ++i) {
            Splitmix64 srng(cfg.mc.seed + 2, static_cast<std::uint64_t>(i));
            const LoopSample s = sampler.sample(srng);
            if (i % 2 == 0) {
                ++pre[static_cast<std::size_t>(s.base)];
                ++n_pre;
            } else {
                const LoopSample r =
                    rotate_loop(s, srng.uniform() * s.lifetime);
                ++post[static_cast<std::size_t>(r.base)];
                ++n_post;
            }
        }
        double stat = 0.0;
        int dof = 0;
        const double na = static_cast<double>(n_pre);
        const double nb = static_cast<double>(n_post);
        for (int x = 0; x < chain.size(); ++x) {
            const double tot = static_cast<double>(pre[x] + post[x]);
            if (tot == 0.0) continue;
            const double diff = pre[x] * nb - post[x] * na;
            stat += diff * diff / (na * nb * tot);
            ++dof;
        }
        const double crit = chi_square_critical(std::max(1, dof - 1), 0.01);
        report.add(CheckRecord{"mc-rotation-invariance", "loop-rotation-shift",
                               seed, stat, crit, stat / crit, stat <= crit});
    }
    });
}

}  // namespace detail

inline RunReport run_suite(const ExperimentConfig& cfg) {
    RunReport report;
    Json echo;
    echo["seed"] = cfg.seed;
    echo["instances"] = cfg.instances;
    echo["checks"] = cfg.checks;
    report.config_echo = echo;
    if (detail::wants(cfg, "identities")) detail::run_identities(cfg, report);
    if (detail::wants(cfg, "norms")) detail::run_norms(cfg, report);
    if (detail::wants(cfg, "killing")) detail::run_killing(cfg, report);
    if (detail::wants(cfg, "levy")) detail::run_levy(cfg, report);
    if (detail::wants(cfg, "jump")) detail::run_jump(cfg, report);
    if (detail::wants(cfg, "mc")) detail::run_mc(cfg, report);
    return report;
}

inline Json report_to_json(const RunReport& report) {
    Json j;
    j["config"] = report.config_echo;
    Json records = Json::array();
    for (const auto& r : report.records) {
        records.push_back(Json{{"name", r.name},
                               {"anchor", r.anchor},
                               {"seed", r.seed},
                               {"lhs", r.lhs},
                               {"rhs", r.rhs},
                               {"rel_error", r.rel_error},
                               {"pass", r.pass}});
    }
    j["records"] = records;
    j["summary"] =
        Json{{"pass", report.n_pass}, {"fail", report.n_fail},
             {"overall", report.overall}};
    return j;
}

inline void write_report_files(const RunReport& report,
                               const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "report.json");
        out << report_to_json(report).dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(out_dir) / "checks.csv");
        out << "seed,check,anchor,lhs,rhs,rel_error,pass\n";
        char buf[256];
        for (const auto& r : report.records) {
            std::snprintf(buf, sizeof buf, "%llu,%s,%s,%.17g,%.17g,%.17g,%d\n",
                          static_cast<unsigned long long>(r.seed),
                          r.name.c_str(), r.anchor.c_str(), r.lhs, r.rhs,
                          r.rel_error, r.pass ? 1 : 0);
            out << buf;
        }
    }
}

}  // namespace loopm
