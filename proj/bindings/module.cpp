#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "msrich/pipeline.hpp"

namespace py = pybind11;
using namespace msrich;

// Thin bindings over the experiment drivers. Long-running calls drop the GIL;
// none of them touch Python state.

PYBIND11_MODULE(_msrich, m) {
  m.doc() = "multiscale Richards solvers with a learned online basis";

  py::class_<CovarianceParams>(m, "CovarianceParams")
      .def(py::init<>())
      .def_readwrite("sigma2", &CovarianceParams::sigma2)
      .def_readwrite("eta1", &CovarianceParams::eta1)
      .def_readwrite("eta2", &CovarianceParams::eta2);

  py::class_<KappaRange>(m, "KappaRange")
      .def(py::init<>())
      .def_readwrite("min", &KappaRange::min)
      .def_readwrite("max", &KappaRange::max);

  py::class_<PicardConfig>(m, "PicardConfig")
      .def(py::init<>())
      .def_readwrite("delta0", &PicardConfig::delta0)
      .def_readwrite("max_iters", &PicardConfig::max_iters);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("validation_fraction", &TrainConfig::validation_fraction)
      .def_readwrite("seed", &TrainConfig::seed);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("fine_n", &RunConfig::fine_n)
      .def_readwrite("coarse_n", &RunConfig::coarse_n)
      .def_readwrite("covariance", &RunConfig::covariance)
      .def_readwrite("energy_fraction", &RunConfig::energy_fraction)
      .def_readwrite("kappa_range", &RunConfig::kappa_range)
      .def_readwrite("nb_list", &RunConfig::nb_list)
      .def_readwrite("train_samples", &RunConfig::train_samples)
      .def_readwrite("test_samples", &RunConfig::test_samples)
      .def_readwrite("picard", &RunConfig::picard)
      .def_readwrite("tau", &RunConfig::tau)
      .def_readwrite("n_steps", &RunConfig::n_steps)
      .def_readwrite("enrichment_steps", &RunConfig::enrichment_steps)
      .def_readwrite("source", &RunConfig::source)
      .def_readwrite("train", &RunConfig::train)
      .def_readwrite("hidden_widths", &RunConfig::hidden_widths)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_readwrite("threads", &RunConfig::threads);

  m.def("parse_config", &parse_config, py::arg("json_text"));
  m.def("load_config", &load_config, py::arg("path"));
  m.def("validate_config", &validate_config, py::arg("config"));

  py::class_<Workspace>(m, "Workspace")
      .def_property_readonly("n_vertices", &Workspace::n_vertices)
      .def_property_readonly("n_fine_nodes",
                             [](const Workspace& ws) { return ws.fine.n_nodes(); })
      .def_property_readonly("patch_length",
                             [](const Workspace& ws) { return ws.nbs.front().m(); })
      .def_readonly("cfg", &Workspace::cfg);
  m.def("make_workspace", &make_workspace, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<DatasetHeader>(m, "DatasetHeader")
      .def_readonly("m", &DatasetHeader::m)
      .def_readonly("n_neighborhoods", &DatasetHeader::n_neighborhoods)
      .def_readonly("samples_per_neighborhood", &DatasetHeader::samples_per_neighborhood)
      .def_readonly("experiment", &DatasetHeader::experiment)
      .def_readonly("time_step", &DatasetHeader::time_step);

  py::class_<DatasetRecord>(m, "DatasetRecord")
      .def_readonly("neighborhood", &DatasetRecord::neighborhood)
      .def_readonly("seed", &DatasetRecord::seed)
      .def_readonly("kappa", &DatasetRecord::kappa)
      .def_readonly("phi", &DatasetRecord::phi);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("header", &Dataset::header)
      .def_readonly("records", &Dataset::records);

  m.def("gen_dataset", &gen_dataset, py::arg("workspace"), py::arg("nb"),
        py::arg("time_step") = std::nullopt, py::call_guard<py::gil_scoped_release>());
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("obtain_dataset", &obtain_dataset, py::arg("workspace"), py::arg("nb"),
        py::arg("time_step") = std::nullopt, py::call_guard<py::gil_scoped_release>());

  py::class_<TrainHistory>(m, "TrainHistory")
      .def_readonly("train_loss", &TrainHistory::train_loss)
      .def_readonly("val_loss", &TrainHistory::val_loss);

  py::class_<TrainArtifacts>(m, "TrainArtifacts")
      .def_readonly("history", &TrainArtifacts::history)
      .def_property_readonly("layer_sizes",
                             [](const TrainArtifacts& a) { return a.model.layer_sizes; })
      .def("predict",
           [](const TrainArtifacts& a, const std::vector<double>& kappa_patch) {
             return predict_basis(a.model, a.bounds, kappa_patch);
           },
           py::arg("kappa_patch"));

  m.def("train_on_dataset", &train_on_dataset, py::arg("workspace"), py::arg("dataset"),
        py::arg("nb"), py::arg("time_step") = std::nullopt,
        py::call_guard<py::gil_scoped_release>());
  m.def("obtain_model", &obtain_model, py::arg("workspace"), py::arg("dataset"), py::arg("nb"),
        py::arg("time_step") = std::nullopt, py::call_guard<py::gil_scoped_release>());

  py::class_<ErrorReport>(m, "ErrorReport")
      .def_readonly("values", &ErrorReport::values)
      .def_readonly("mean", &ErrorReport::mean)
      .def_readonly("min", &ErrorReport::min)
      .def_readonly("max", &ErrorReport::max)
      .def_readonly("highlight_index", &ErrorReport::highlight_index)
      .def_readonly("highlight", &ErrorReport::highlight);

  py::class_<RmseResult>(m, "RmseResult")
      .def_readonly("value", &RmseResult::value)
      .def_readonly("degenerate", &RmseResult::degenerate);

  py::class_<BasisEval>(m, "BasisEval")
      .def_readonly("cer", &BasisEval::cer)
      .def_readonly("rmse", &BasisEval::rmse)
      .def_readonly("rmse_untrained", &BasisEval::rmse_untrained);

  m.def("eval_basis",
        [](const Workspace& ws, const Dataset& ds, const TrainArtifacts& art) {
          py::gil_scoped_release release;
          return eval_basis(ws, ds, art.model, art.bounds, &art.untrained);
        },
        py::arg("workspace"), py::arg("dataset"), py::arg("artifacts"));

  py::class_<SteadyNbReport>(m, "SteadyNbReport")
      .def_readonly("nb", &SteadyNbReport::nb)
      .def_readonly("basis", &SteadyNbReport::basis)
      .def_readonly("l2", &SteadyNbReport::l2)
      .def_readonly("h1", &SteadyNbReport::h1)
      .def_readonly("degenerate", &SteadyNbReport::degenerate);

  py::class_<SteadyReport>(m, "SteadyReport")
      .def_readonly("per_nb", &SteadyReport::per_nb);

  m.def("run_steady", &run_steady, py::arg("workspace"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<TimeNbReport>(m, "TimeNbReport")
      .def_readonly("nb", &TimeNbReport::nb)
      .def_readonly("steps", &TimeNbReport::steps)
      .def_readonly("basis", &TimeNbReport::basis)
      .def_readonly("last_l2", &TimeNbReport::last_l2)
      .def_readonly("last_h1", &TimeNbReport::last_h1)
      .def_readonly("boch_l2", &TimeNbReport::boch_l2)
      .def_readonly("boch_h1", &TimeNbReport::boch_h1)
      .def_readonly("step_l2", &TimeNbReport::step_l2)
      .def_readonly("step_h1", &TimeNbReport::step_h1)
      .def_readonly("degenerate", &TimeNbReport::degenerate)
      .def_readonly("max_abs_direct", &TimeNbReport::max_abs_direct)
      .def_readonly("max_abs_pred", &TimeNbReport::max_abs_pred)
      .def_readonly("max_abs_diff", &TimeNbReport::max_abs_diff);

  py::class_<TimeReport>(m, "TimeReport")
      .def_readonly("per_nb", &TimeReport::per_nb);

  m.def("run_time_dependent", &run_time_dependent, py::arg("workspace"),
        py::call_guard<py::gil_scoped_release>());

  m.def("report_timing", &report_timing, py::arg("out_dir"));

  m.def("dataset_path", &dataset_path, py::arg("config"), py::arg("nb"),
        py::arg("time_step") = std::nullopt);
  m.def("model_path", &model_path, py::arg("config"), py::arg("nb"),
        py::arg("time_step") = std::nullopt);
}
