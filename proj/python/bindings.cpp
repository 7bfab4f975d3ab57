#include "n2r/harness.hpp"
#include "n2r/nn/gradcheck.hpp"
#include "n2r/wavelet_cs.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace n2r;

namespace {

using CArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;

ComplexImage image_from(CArray const &a)
{
  if (a.ndim() != 2) { throw DimensionError("expected a 2-D complex array"); }
  auto const *p = a.data();
  return {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), std::vector<Complex>(p, p + a.size())};
}

CArray image_to(ComplexImage const &x)
{
  CArray out({x.height(), x.width()});
  std::copy(x.data().begin(), x.data().end(), out.mutable_data());
  return out;
}

CArray stack_to(std::span<Complex const> v, int c, int h, int w)
{
  CArray out({c, h, w});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

CoilSensitivities sens_from(CArray const &a)
{
  if (a.ndim() != 3) { throw DimensionError("expected coil maps shaped (C, H, W)"); }
  auto const *p = a.data();
  return {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
          std::vector<Complex>(p, p + a.size())};
}

KSpace kspace_from(CArray const &a, SamplingMask const &mask)
{
  if (a.ndim() != 3) { throw DimensionError("expected k-space shaped (C, H, W)"); }
  auto const *p = a.data();
  return {static_cast<int>(a.shape(0)), mask, std::vector<Complex>(p, p + a.size())};
}

CArray kspace_to(KSpace const &y) { return stack_to(y.data(), y.ncoils(), y.height(), y.width()); }

py::array_t<bool> mask_to(SamplingMask const &m)
{
  py::array_t<bool> out({m.height(), m.width()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

} // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Noise2Recon desk-scale MRI reconstruction lab";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<SamplingMask>(m, "SamplingMask")
    .def_static("full", &SamplingMask::full, py::arg("height"), py::arg("width"))
    .def(py::init([](py::array_t<bool, py::array::c_style | py::array::forcecast> a, double accel, int calib) {
           if (a.ndim() != 2) { throw DimensionError("expected a 2-D mask"); }
           return SamplingMask(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                               std::vector<std::uint8_t>(a.data(), a.data() + a.size()), accel, calib);
         }),
         py::arg("mask"), py::arg("acceleration") = 1.0, py::arg("calib") = 0)
    .def_property_readonly("acceleration", &SamplingMask::acceleration)
    .def_property_readonly("calib_size", &SamplingMask::calib_size)
    .def_property_readonly("shape", [](SamplingMask const &s) { return py::make_tuple(s.height(), s.width()); })
    .def("count", &SamplingMask::count)
    .def("empirical_acceleration", &SamplingMask::empirical_acceleration)
    .def("array", &mask_to);

  m.def("fft2c", [](CArray const &x) { return image_to(fft2c(image_from(x))); });
  m.def("ifft2c", [](CArray const &x) { return image_to(ifft2c(image_from(x))); });
  m.def("poisson_disc_mask", &make_poisson_disc_mask, py::arg("height"), py::arg("width"), py::arg("accel"),
        py::arg("calib"), py::arg("seed"));
  m.def(
    "coil_sensitivities",
    [](int h, int w, int c, std::uint64_t seed) {
      auto const s = make_coil_sensitivities(h, w, c, seed);
      return stack_to(s.data(), c, h, w);
    },
    py::arg("height"), py::arg("width"), py::arg("ncoils"), py::arg("seed"));
  m.def(
    "phantom", [](int h, int w, std::uint64_t seed) { return image_to(make_phantom(h, w, seed)); }, py::arg("height"),
    py::arg("width"), py::arg("seed"));
  m.def(
    "forward_model",
    [](CArray const &x, CArray const &sens, SamplingMask const &mask) {
      return kspace_to(forward_model(image_from(x), sens_from(sens), mask));
    },
    py::arg("image"), py::arg("sens"), py::arg("mask"), "y_c = mask * fft2c(S_c * x)");
  m.def(
    "adjoint_sense",
    [](CArray const &y, CArray const &sens, SamplingMask const &mask) {
      return image_to(adjoint_sense(kspace_from(y, mask), sens_from(sens)));
    },
    py::arg("kspace"), py::arg("sens"), py::arg("mask"));
  m.def(
    "add_masked_noise",
    [](CArray const &y, SamplingMask const &mask, double sigma, std::uint64_t seed, CArray const &scale_ref) {
      return kspace_to(add_masked_noise(kspace_from(y, mask), {sigma, seed}, image_from(scale_ref)));
    },
    py::arg("kspace"), py::arg("mask"), py::arg("sigma"), py::arg("seed"), py::arg("scale_ref"));

  m.def(
    "dwt2",
    [](CArray const &x, int levels) { return image_to(dwt2(image_from(x), levels).data); }, py::arg("image"),
    py::arg("levels"));
  m.def(
    "idwt2",
    [](CArray const &c, int levels) { return image_to(idwt2({image_from(c), levels})); }, py::arg("coeffs"),
    py::arg("levels"));
  m.def(
    "cs_solve",
    [](CArray const &y, CArray const &sens, SamplingMask const &mask, double lambda, int iters) {
      CSConfig c;
      c.lambda = lambda;
      c.iters = iters;
      auto const r = cs_solve(kspace_from(y, mask), sens_from(sens), c);
      return py::make_tuple(image_to(r.image), r.objective);
    },
    py::arg("kspace"), py::arg("sens"), py::arg("mask"), py::arg("lam"), py::arg("iters") = 25,
    "Returns (image, objective history).");
  m.def("cs_lambda_schedule", &cs_lambda_schedule, py::arg("accel"), py::arg("sigma"));

  m.def(
    "psnr", [](CArray const &x, CArray const &ref) { return metrics::psnr(image_from(x), image_from(ref)); },
    py::arg("x"), py::arg("ref"));
  m.def(
    "nrmse", [](CArray const &x, CArray const &ref) { return metrics::nrmse(image_from(x), image_from(ref)); },
    py::arg("x"), py::arg("ref"));
  m.def(
    "ssim", [](CArray const &x, CArray const &ref) { return metrics::ssim(image_from(x), image_from(ref)); },
    py::arg("x"), py::arg("ref"));

  m.def(
    "gradcheck",
    [](std::uint64_t seed, int ncoords) {
      py::list out;
      for (auto const &r : nn::standard_gradient_checks(seed, ncoords)) {
        out.append(py::dict(py::arg("name") = r.name, py::arg("coords") = r.coords,
                            py::arg("max_rel_error") = r.max_rel_error, py::arg("passed") = r.passed));
      }
      return out;
    },
    py::arg("seed") = 0, py::arg("ncoords") = 50);

  m.def(
    "simulate",
    [](std::filesystem::path const &config, std::filesystem::path const &out, bool force) {
      auto const c = config.empty() ? harness::ExperimentConfig{} : harness::load_config(config);
      py::gil_scoped_release nogil;
      harness::simulate(c, out, force);
    },
    py::arg("config"), py::arg("out"), py::arg("force") = false);
  m.def(
    "train",
    [](std::filesystem::path const &config, std::filesystem::path const &dataset, std::filesystem::path const &out,
       bool force) {
      auto const c = config.empty() ? harness::ExperimentConfig{} : harness::load_config(config);
      py::gil_scoped_release nogil;
      return harness::train(c, dataset, out, force).checkpoint;
    },
    py::arg("config"), py::arg("dataset"), py::arg("out"), py::arg("force") = false);
  m.def(
    "evaluate",
    [](std::filesystem::path const &config, std::filesystem::path const &dataset,
       std::vector<std::filesystem::path> const &checkpoints, bool zero_filled) {
      auto const c = config.empty() ? harness::ExperimentConfig{} : harness::load_config(config);
      std::vector<harness::Reconstructor> recons;
      for (auto const &p : checkpoints) {
        recons.push_back(harness::model_reconstructor(p));
      }
      if (zero_filled) { recons.push_back(harness::zero_filled_reconstructor()); }
      std::vector<metrics::MetricRecord> rows;
      {
        py::gil_scoped_release nogil;
        rows = harness::evaluate(dataset, c.eval, recons);
      }
      std::ostringstream os;
      metrics::write_csv(os, rows);
      return os.str();
    },
    py::arg("config"), py::arg("dataset"), py::arg("checkpoints"), py::arg("zero_filled") = false,
    "Returns the metrics CSV text.");
  m.def(
    "report",
    [](std::vector<std::filesystem::path> const &csvs, std::optional<std::filesystem::path> const &out) {
      return harness::report(csvs, out.value_or(std::filesystem::path{}));
    },
    py::arg("csvs"), py::arg("out") = py::none());
}
