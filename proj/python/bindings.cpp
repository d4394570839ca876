#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cprop/conformity.hpp"
#include "cprop/harness.hpp"
#include "cprop/optim.hpp"
#include "cprop/oracle.hpp"
#include "cprop/problems.hpp"
#include "cprop/record_io.hpp"

namespace py = pybind11;
using namespace cprop;

namespace {

GradientTrace make_trace(const std::vector<double>& values) {
  GradientTrace trace;
  trace.values = values;
  return trace;
}

py::tuple eval_problem(const Problem& problem, const std::vector<double>& params,
                       std::uint64_t seed) {
  std::vector<double> grad;
  const double loss = problem.eval(params, seed, grad);
  return py::make_tuple(loss, grad);
}

std::vector<double> full_gradient_of(const Problem& problem, const std::vector<double>& params) {
  std::vector<double> grad;
  problem.full_gradient(params, grad);
  return grad;
}

}  // namespace

PYBIND11_MODULE(_cprop, m) {
  m.doc() = "Conformity-scaled learning rates for first-order optimizers";

  m.def("erf", &cprop::erf, py::arg("x"), "Error function used by every scale computation");
  m.def("normal_cdf", &normal_cdf, py::arg("x"), py::arg("mean"), py::arg("stddev"));

  py::class_<ConformityConfig>(m, "ConformityConfig")
      .def(py::init([](double beta, double c, double epsilon) {
             ConformityConfig cfg{beta, c, epsilon};
             cfg.validate();
             return cfg;
           }),
           py::arg("beta") = 0.999, py::arg("c") = 1.0, py::arg("epsilon") = 1e-8)
      .def_readwrite("beta", &ConformityConfig::beta)
      .def_readwrite("c", &ConformityConfig::c)
      .def_readwrite("epsilon", &ConformityConfig::epsilon)
      .def("__repr__", [](const ConformityConfig& cfg) {
        return "ConformityConfig(beta=" + std::to_string(cfg.beta) +
               ", c=" + std::to_string(cfg.c) + ", epsilon=" + std::to_string(cfg.epsilon) + ")";
      });

  py::class_<GradientMoments>(m, "GradientMoments")
      .def(py::init<std::size_t>(), py::arg("dim"))
      .def_readonly("m", &GradientMoments::m)
      .def_readonly("v", &GradientMoments::v)
      .def_readonly("t", &GradientMoments::t)
      .def("__len__", &GradientMoments::size);

  m.def(
      "update_moments",
      [](GradientMoments& state, const std::vector<double>& g, double beta) {
        update_moments(state, g, beta);
      },
      py::arg("state"), py::arg("g"), py::arg("beta"));
  m.def(
      "bias_correct",
      [](const GradientMoments& state, double beta) {
        std::vector<double> m_hat, v_hat;
        bias_correct(state, beta, m_hat, v_hat);
        return py::make_tuple(m_hat, v_hat);
      },
      py::arg("state"), py::arg("beta"));
  m.def("effective_count", &effective_count, py::arg("t"), py::arg("beta"));
  m.def(
      "std_error",
      [](const std::vector<double>& m_hat, const std::vector<double>& v_hat, double n,
         double epsilon) {
        std::vector<double> sigma;
        std_error(m_hat, v_hat, n, epsilon, sigma);
        return sigma;
      },
      py::arg("m_hat"), py::arg("v_hat"), py::arg("n"), py::arg("epsilon"));
  m.def(
      "sign_confidence",
      [](const std::vector<double>& m_hat, const std::vector<double>& sigma) {
        std::vector<double> p_neg;
        sign_confidence(m_hat, sigma, p_neg);
        return p_neg;
      },
      py::arg("m_hat"), py::arg("sigma"));
  m.def(
      "conformity_scale",
      [](const std::vector<double>& p_neg, double c) {
        std::vector<double> s;
        conformity_scale(p_neg, c, s);
        return s;
      },
      py::arg("p_neg"), py::arg("c"));
  m.def(
      "cprop_step_scale",
      [](GradientMoments& state, const std::vector<double>& g, const ConformityConfig& cfg) {
        return cprop_step_scale(state, g, cfg);
      },
      py::arg("state"), py::arg("g"), py::arg("config"),
      "Advance the moment state by one gradient and return the step's scale");

  m.def(
      "exact_full_history_scale",
      [](const std::vector<double>& trace, double epsilon) {
        return exact_full_history_scale(make_trace(trace), epsilon);
      },
      py::arg("trace"), py::arg("epsilon") = 1e-8);
  m.def(
      "bootstrap_scale",
      [](const std::vector<double>& trace, int n_resamples, std::uint64_t seed, double c) {
        return bootstrap_scale(make_trace(trace), n_resamples, seed, c);
      },
      py::arg("trace"), py::arg("n_resamples") = 10000, py::arg("seed") = 0, py::arg("c") = 1.0);

  py::enum_<OptimizerKind>(m, "OptimizerKind")
      .value("sgd", OptimizerKind::Sgd)
      .value("adam", OptimizerKind::Adam)
      .value("rmsprop", OptimizerKind::RmsProp)
      .value("amsgrad", OptimizerKind::AmsGrad)
      .value("adabound", OptimizerKind::AdaBound);

  py::enum_<ScalingKind>(m, "ScalingKind")
      .value("none", ScalingKind::None)
      .value("cprop", ScalingKind::CProp)
      .value("relative", ScalingKind::RelativeRate)
      .value("moment", ScalingKind::MomentRate);

  py::class_<ScaledOptimizer>(m, "Optimizer")
      .def(py::init([](std::size_t dim, const std::string& kind, double lr,
                       const std::string& scaling, double beta, double c, double epsilon,
                       double beta1, double beta2, double alpha, double base_epsilon,
                       double final_lr) {
             OptimizerConfig base;
             base.kind = optimizer_kind_from_string(kind);
             base.lr = lr;
             base.beta1 = beta1;
             base.beta2 = beta2;
             base.alpha = alpha;
             base.epsilon = base_epsilon;
             base.final_lr = final_lr;
             return ScaledOptimizer(dim, base, scaling_kind_from_string(scaling),
                                    ConformityConfig{beta, c, epsilon});
           }),
           py::arg("dim"), py::arg("kind") = "sgd", py::arg("lr") = 0.1,
           py::arg("scaling") = "none", py::arg("beta") = 0.999, py::arg("c") = 1.0,
           py::arg("epsilon") = 1e-8, py::arg("beta1") = 0.9, py::arg("beta2") = 0.999,
           py::arg("alpha") = 0.99, py::arg("base_epsilon") = 1e-8, py::arg("final_lr") = 0.1)
      .def(
          "step",
          [](ScaledOptimizer& opt, std::vector<double> params, const std::vector<double>& grad) {
            opt.step(params, grad);
            return params;
          },
          py::arg("params"), py::arg("grad"), "Apply one update and return the new parameters")
      .def_property_readonly("last_scale",
                             [](const ScaledOptimizer& opt) { return opt.last_scale(); })
      .def_property_readonly("last_direction",
                             [](const ScaledOptimizer& opt) { return opt.last_direction(); });

  py::class_<SyntheticDataset>(m, "SyntheticDataset")
      .def_readonly("n", &SyntheticDataset::n)
      .def_readonly("dim", &SyntheticDataset::dim)
      .def_readonly("num_classes", &SyntheticDataset::num_classes)
      .def_readonly("inputs", &SyntheticDataset::inputs)
      .def_readonly("labels", &SyntheticDataset::labels);

  m.def("gaussian_blobs", &gaussian_blobs, py::arg("n_samples"), py::arg("dim"),
        py::arg("num_classes"), py::arg("margin"), py::arg("seed"));
  m.def("two_spirals", &two_spirals, py::arg("n_samples"), py::arg("noise"), py::arg("seed"));
  m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));

  py::class_<Problem>(m, "Problem")
      .def_property_readonly("dim", &Problem::dim)
      .def_property_readonly("name", &Problem::name)
      .def("eval", &eval_problem, py::arg("params"), py::arg("seed") = 0,
           "Returns (loss, gradient) for the seeded sample")
      .def("full_loss",
           [](const Problem& p, const std::vector<double>& params) { return p.full_loss(params); })
      .def("full_gradient", &full_gradient_of, py::arg("params"))
      .def("initial_params", &Problem::initial_params, py::arg("seed") = 0);

  py::class_<NoisyQuadratic, Problem>(m, "NoisyQuadratic")
      .def(py::init<int, double, double>(), py::arg("dim"), py::arg("kappa"),
           py::arg("noise") = 0.0)
      .def_property_readonly("diagonal", &NoisyQuadratic::diagonal);

  py::class_<Rosenbrock, Problem>(m, "Rosenbrock").def(py::init<int>(), py::arg("dim"));

  py::class_<SyntheticLogistic, Problem>(m, "SyntheticLogistic")
      .def(py::init<int, int, double, std::uint64_t, int>(), py::arg("n_samples"), py::arg("dim"),
           py::arg("margin"), py::arg("seed"), py::arg("batch_size") = 32);

  py::class_<TinyMlp, Problem>(m, "TinyMlp")
      .def(py::init<std::vector<int>, std::string, SyntheticDataset, std::uint64_t, double, int>(),
           py::arg("widths"), py::arg("activation"), py::arg("dataset"), py::arg("seed"),
           py::arg("dropout") = 0.0, py::arg("batch_size") = 32);

  m.def(
      "clip_gradient_norm",
      [](std::vector<double> g, double max_norm) {
        clip_gradient_norm(g, max_norm);
        return g;
      },
      py::arg("g"), py::arg("max_norm"));
  m.def(
      "smooth_series",
      [](const std::vector<double>& series, long window) {
        return smooth_series(series, window);
      },
      py::arg("series"), py::arg("window"));

  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def(py::init<>())
      .def_readwrite("kind", &ProblemSpec::kind)
      .def_readwrite("dim", &ProblemSpec::dim)
      .def_readwrite("kappa", &ProblemSpec::kappa)
      .def_readwrite("noise", &ProblemSpec::noise)
      .def_readwrite("n_samples", &ProblemSpec::n_samples)
      .def_readwrite("margin", &ProblemSpec::margin)
      .def_readwrite("data_seed", &ProblemSpec::data_seed)
      .def_readwrite("widths", &ProblemSpec::widths)
      .def_readwrite("activation", &ProblemSpec::activation)
      .def_readwrite("dropout", &ProblemSpec::dropout)
      .def_readwrite("classes", &ProblemSpec::classes)
      .def_readwrite("dataset", &ProblemSpec::dataset);

  py::class_<OptimizerSpec>(m, "OptimizerSpec")
      .def(py::init([](const std::string& kind, double lr, const std::string& scaling,
                       double beta, double c, double epsilon) {
             OptimizerSpec spec;
             spec.base.kind = optimizer_kind_from_string(kind);
             spec.base.lr = lr;
             spec.scaling = scaling_kind_from_string(scaling);
             spec.conf = ConformityConfig{beta, c, epsilon};
             return spec;
           }),
           py::arg("kind") = "sgd", py::arg("lr") = 0.1, py::arg("scaling") = "none",
           py::arg("beta") = 0.999, py::arg("c") = 1.0, py::arg("epsilon") = 1e-8)
      .def_property_readonly("label", &OptimizerSpec::label)
      .def_property(
          "lr", [](const OptimizerSpec& s) { return s.base.lr; },
          [](OptimizerSpec& s, double lr) { s.base.lr = lr; });

  py::class_<LogPoint>(m, "LogPoint")
      .def_readonly("iter", &LogPoint::iter)
      .def_readonly("loss", &LogPoint::loss)
      .def_readonly("mean_scale", &LogPoint::mean_scale)
      .def_property_readonly("hist",
                             [](const LogPoint& p) {
                               return std::vector<long>(p.hist.begin(), p.hist.end());
                             });

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("seed", &RunRecord::seed)
      .def_readonly("points", &RunRecord::points)
      .def_readonly("diverged", &RunRecord::diverged)
      .def_readonly("diverged_at", &RunRecord::diverged_at)
      .def_property_readonly("final_loss", &RunRecord::final_loss)
      .def_property_readonly("initial_loss", &RunRecord::initial_loss);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("problem", &ExperimentConfig::problem)
      .def_readwrite("optimizers", &ExperimentConfig::optimizers)
      .def_readwrite("seeds", &ExperimentConfig::seeds)
      .def_readwrite("iterations", &ExperimentConfig::iterations)
      .def_readwrite("log_interval", &ExperimentConfig::log_interval)
      .def_readwrite("clip_norm", &ExperimentConfig::clip_norm)
      .def_readwrite("batch_size", &ExperimentConfig::batch_size)
      .def("validate", &ExperimentConfig::validate);

  m.def("run_experiment", &run_experiment, py::arg("config"),
        "Run the config's first optimizer for every seed; one RunRecord per seed");

  py::class_<LrSearchResult>(m, "LrSearchResult")
      .def_readonly("best_lr", &LrSearchResult::best_lr)
      .def_readonly("ladder", &LrSearchResult::ladder)
      .def_readonly("losses", &LrSearchResult::losses)
      .def_readonly("interior", &LrSearchResult::interior);

  m.def(
      "lr_search",
      [](const Problem& problem, const OptimizerSpec& opt, long budget, double guess_lo,
         double guess_hi, std::uint64_t seed, double clip_norm) {
        return lr_search(problem, opt, budget, guess_lo, guess_hi, seed, clip_norm);
      },
      py::arg("problem"), py::arg("optimizer"), py::arg("budget") = 500,
      py::arg("guess_lo") = 0.1, py::arg("guess_hi") = 0.3, py::arg("seed") = 0,
      py::arg("clip_norm") = 0.0,
      "Factor-of-3 ladder search; returns the best rate and the evaluated ladder");

  py::register_exception<LrSearchError>(m, "LrSearchError");
}
