#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "geoworld/checkpoint.hpp"
#include "geoworld/gaussian.hpp"
#include "geoworld/runner.hpp"

namespace py = pybind11;
using namespace geoworld;

namespace {

py::array_t<double> observation_array(const env::Observation& obs) {
  py::array_t<double> out({env::Observation::kView, env::Observation::kView, env::Observation::kChannels});
  std::copy(obs.values.begin(), obs.values.end(), out.mutable_data());
  return out;
}

env::Observation observation_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.size() != env::Observation::kSize) throw std::invalid_argument("observation must have 7*7*3 = 147 values");
  env::Observation obs;
  std::copy(a.data(), a.data() + a.size(), obs.values.begin());
  return obs;
}

py::array_t<double> tensor_array(const nn::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

py::dict dataset_dict(const collect::ProbeDataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.records.size());
  py::array_t<double> mu({n, static_cast<py::ssize_t>(wm::kLatentDim)});
  py::array_t<int> x(n), y(n), dir(n);
  auto m = mu.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& r = ds.records[static_cast<std::size_t>(i)];
    for (py::ssize_t k = 0; k < static_cast<py::ssize_t>(wm::kLatentDim); ++k) m(i, k) = r.mu[static_cast<std::size_t>(k)];
    x.mutable_at(i) = r.x;
    y.mutable_at(i) = r.y;
    dir.mutable_at(i) = r.dir;
  }
  py::dict d;
  d["mu"] = mu;
  d["x"] = x;
  d["y"] = y;
  d["dir"] = dir;
  return d;
}

collect::ProbeDataset dataset_from(const py::dict& d, std::uint64_t split_seed) {
  const auto mu = d["mu"].cast<py::array_t<double, py::array::c_style | py::array::forcecast>>();
  const auto x = d["x"].cast<py::array_t<int, py::array::forcecast>>();
  const auto y = d["y"].cast<py::array_t<int, py::array::forcecast>>();
  const auto dir = d["dir"].cast<py::array_t<int, py::array::forcecast>>();
  if (mu.ndim() != 2 || mu.shape(1) != static_cast<py::ssize_t>(wm::kLatentDim)) {
    throw std::invalid_argument("mu must have shape (n, 32)");
  }
  const auto n = mu.shape(0);
  if (x.size() != n || y.size() != n || dir.size() != n) throw std::invalid_argument("label arrays must have length n");
  collect::ProbeDataset ds;
  ds.split_seed = split_seed;
  for (py::ssize_t i = 0; i < n; ++i) {
    collect::LabeledLatent r;
    for (std::size_t k = 0; k < wm::kLatentDim; ++k) r.mu[k] = mu.at(i, static_cast<py::ssize_t>(k));
    r.x = x.at(i);
    r.y = y.at(i);
    r.dir = dir.at(i);
    ds.records.push_back(r);
  }
  return ds;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "VAE world model on an egocentric grid world: training, probing and RSA.";
  m.attr("__version__") = GEOWORLD_VERSION;

  py::class_<env::GridConfig>(m, "GridConfig")
      .def(py::init<>())
      .def_static("empty8", &env::GridConfig::empty8)
      .def_static("empty16", &env::GridConfig::empty16)
      .def_readwrite("outer_size", &env::GridConfig::outer_size)
      .def_readwrite("goal_enabled", &env::GridConfig::goal_enabled)
      .def_readwrite("max_steps", &env::GridConfig::max_steps)
      .def_readwrite("seed", &env::GridConfig::seed)
      .def_readwrite("done_action_terminates", &env::GridConfig::done_action_terminates)
      .def_property_readonly("name", &env::GridConfig::name)
      .def("__repr__", [](const env::GridConfig& c) { return "<GridConfig " + c.name() + ">"; });

  py::class_<env::AgentState>(m, "AgentState")
      .def(py::init<>())
      .def(py::init([](int x, int y, int dir) { return env::AgentState{x, y, dir}; }), py::arg("x"), py::arg("y"),
           py::arg("dir"))
      .def_readwrite("x", &env::AgentState::x)
      .def_readwrite("y", &env::AgentState::y)
      .def_readwrite("dir", &env::AgentState::dir)
      .def("__eq__", [](const env::AgentState& a, const env::AgentState& b) { return a == b; })
      .def("__repr__", [](const env::AgentState& s) {
        return "AgentState(x=" + std::to_string(s.x) + ", y=" + std::to_string(s.y) + ", dir=" + std::to_string(s.dir) +
               ")";
      });

  m.attr("NUM_ACTIONS") = env::kNumActions;

  m.def(
      "render_observation",
      [](const env::GridConfig& c, const env::AgentState& s) { return observation_array(env::render_observation(s, c)); },
      py::arg("config"), py::arg("state"), "Egocentric 7x7x3 view, normalised to [0, 1].");
  m.def(
      "apply_action",
      [](const env::GridConfig& c, const env::AgentState& s, int action) {
        if (action < 0 || action >= env::kNumActions) throw std::invalid_argument("action must be in [0, 7)");
        return env::apply_action(s, static_cast<env::Action>(action), c);
      },
      py::arg("config"), py::arg("state"), py::arg("action"));

  py::class_<wm::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("beta", &wm::TrainConfig::beta)
      .def_readwrite("total_steps", &wm::TrainConfig::total_steps)
      .def_readwrite("lr", &wm::TrainConfig::lr)
      .def_readwrite("batch_size", &wm::TrainConfig::batch_size)
      .def_readwrite("buffer_capacity", &wm::TrainConfig::buffer_capacity)
      .def_readwrite("checkpoint_steps", &wm::TrainConfig::checkpoint_steps)
      .def_readwrite("seed", &wm::TrainConfig::seed)
      .def_readwrite("env", &wm::TrainConfig::env)
      .def_readwrite("log_every", &wm::TrainConfig::log_every)
      .def_readwrite("target_gradient", &wm::TrainConfig::target_gradient)
      .def_property(
          "condition", [](const wm::TrainConfig& c) { return c.perturbation.label(); },
          [](wm::TrainConfig& c, const std::string& s) { c.perturbation = env::Perturbation::parse(s); })
      .def("validate", &wm::TrainConfig::validate)
      .def("digest", &wm::TrainConfig::digest)
      .def("to_text", [](const wm::TrainConfig& c) { return c.to_doc().serialize(); })
      .def_static("from_text", [](const std::string& text) { return wm::TrainConfig::from_doc(KeyValueDoc::parse(text)); });

  py::class_<wm::Checkpoint>(m, "Checkpoint")
      .def_readonly("step", &wm::Checkpoint::step)
      .def_readonly("train_config", &wm::Checkpoint::train_config)
      .def("parameters",
           [](const wm::Checkpoint& c) {
             py::dict d;
             for (const auto& nt : c.params.tensors()) d[py::str(nt.name)] = tensor_array(*nt.tensor);
             return d;
           })
      .def("__eq__", [](const wm::Checkpoint& a, const wm::Checkpoint& b) { return a == b; });

  m.def("initial_checkpoint", &wm::initial_checkpoint, py::arg("config"));
  m.def(
      "train", [](const wm::TrainConfig& c) { return wm::train(c); }, py::arg("config"),
      py::call_guard<py::gil_scoped_release>(), "Train and return the checkpoints at config.checkpoint_steps.");
  m.def("save_checkpoint", &wm::save_checkpoint, py::arg("checkpoint"), py::arg("path"));
  m.def("load_checkpoint", &wm::load_checkpoint, py::arg("path"));

  m.def(
      "encode",
      [](const wm::Checkpoint& c, const py::array_t<double, py::array::c_style | py::array::forcecast>& obs) {
        const auto e = wm::encode(c.params, observation_from(obs));
        return py::make_tuple(py::array_t<double>(static_cast<py::ssize_t>(e.mu.size()), e.mu.data()),
                              py::array_t<double>(static_cast<py::ssize_t>(e.log_var.size()), e.log_var.data()));
      },
      py::arg("checkpoint"), py::arg("observation"), "Encoder mean and log-variance of one observation.");
  m.def(
      "gaussian_kl",
      [](const std::vector<double>& mu, const std::vector<double>& log_var) { return nn::gaussian_kl(mu, log_var); },
      py::arg("mu"), py::arg("log_var"));

  m.def(
      "collect",
      [](const wm::Checkpoint& c, int n_episodes, const std::string& condition, std::uint64_t seed) {
        collect::CollectOptions o;
        o.n_episodes = n_episodes;
        o.perturbation = env::Perturbation::parse(condition);
        o.seed = seed;
        return dataset_dict(collect::collect_pairs(c, o));
      },
      py::arg("checkpoint"), py::arg("n_episodes") = 200, py::arg("condition") = "clean", py::arg("seed") = 0,
      "Encoder means and true poses from random exploration: dict of mu, x, y, dir arrays.");

  m.def(
      "probe",
      [](const py::dict& data, std::uint64_t split_seed) {
        const auto r = probe::run_probes(dataset_from(data, split_seed));
        py::dict d;
        d["dir_acc"] = r.direction_accuracy;
        d["x_r2"] = r.x_r2;
        d["y_r2"] = r.y_r2;
        d["n_train"] = r.n_train;
        d["n_test"] = r.n_test;
        return d;
      },
      py::arg("data"), py::arg("split_seed") = 0, "Logistic direction probe and ridge position probes, 80/20 split.");

  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto s = rsa::spearman(x, y);
        return py::make_tuple(s.r, s.p);
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "welch_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto t = stats::welch_t_test(a, b);
        return py::make_tuple(t.t, t.p, t.df);
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "evaluate",
      [](const wm::Checkpoint& c, int n_episodes, std::size_t rsa_states) {
        runner::EvalOptions o;
        o.n_episodes = n_episodes;
        o.rsa_states = rsa_states;
        runner::EvalRow r;
        {
          py::gil_scoped_release release;
          r = runner::evaluate_checkpoint(c, o);
        }
        py::dict d;
        for (auto metric : analysis::kAllMetrics) d[analysis::metric_name(metric)] = analysis::metric_value(r.metrics, metric);
        d["step"] = r.metrics.step;
        d["rsa_degenerate"] = r.rsa_degenerate;
        return d;
      },
      py::arg("checkpoint"), py::arg("n_episodes") = 200, py::arg("rsa_states") = 500);

  m.def(
      "report", [](const std::filesystem::path& results, const std::filesystem::path& out) {
        return runner::write_report(results, out).written;
      },
      py::arg("results_dir"), py::arg("out_dir"));
}
