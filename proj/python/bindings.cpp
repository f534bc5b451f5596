#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssp/errors.hpp"
#include "ssp/fusion.hpp"
#include "ssp/gallery_io.hpp"
#include "ssp/guidance.hpp"
#include "ssp/losses.hpp"
#include "ssp/rerank.hpp"
#include "ssp/retrieval.hpp"
#include "ssp/tensor.hpp"

namespace py = pybind11;
using namespace ssp;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

TensorT<double> tensor_from(const Arr& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a (h, w, c) array");
  TensorT<double> t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                    static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

py::array_t<double> tensor_to(const TensorT<double>& t) {
  py::array_t<double> out({t.height, t.width, t.channels});
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

GuidanceMapT<double> map_from(const Arr& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a (h, w) map");
  GuidanceMapT<double> m(static_cast<int>(a.shape(0)),
                         static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.weights.begin());
  return m;
}

ParsingMapsT<double> parsing_from(const Arr& a) {
  if (a.ndim() != 3 || a.shape(0) != kParsingRegions)
    throw std::invalid_argument("expected a (5, h, w) region stack");
  ParsingMapsT<double> maps;
  int h = static_cast<int>(a.shape(1)), w = static_cast<int>(a.shape(2));
  for (int r = 0; r < kParsingRegions; ++r) {
    maps.regions[r] = GuidanceMapT<double>(h, w);
    const double* src = a.data() + static_cast<size_t>(r) * h * w;
    std::copy(src, src + static_cast<size_t>(h) * w,
              maps.regions[r].weights.begin());
  }
  return maps;
}

std::vector<double> vec_from(const Arr& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d vector");
  return std::vector<double>(a.data(), a.data() + a.size());
}

py::array_t<double> vec_to(const std::vector<double>& v) {
  // The scalar-count array_t constructor in pybind11 3.0 yields zero strides;
  // spell the shape out as a container.
  py::array_t<double> out(std::vector<py::ssize_t>{
      static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<FeatureVector> features_from(const Arr& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a (n, dim) array");
  std::vector<FeatureVector> out(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    out[i].resize(a.shape(1));
    for (py::ssize_t j = 0; j < a.shape(1); ++j)
      out[i][j] = static_cast<float>(a.at(i, j));
  }
  return out;
}

py::array_t<double> matrix_to(const DistMatrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  std::copy(m.values.begin(), m.values.end(), out.mutable_data());
  return out;
}

std::vector<GalleryEntry> entries_from(const Arr& feats,
                                       const std::vector<uint32_t>& ids,
                                       const std::vector<uint16_t>& cams) {
  auto features = features_from(feats);
  if (ids.size() != features.size() || cams.size() != features.size())
    throw std::invalid_argument("ids/cameras/features length mismatch");
  std::vector<GalleryEntry> out(features.size());
  for (size_t i = 0; i < features.size(); ++i)
    out[i] = {ids[i], cams[i], std::move(features[i])};
  return out;
}

Protocol protocol_from(const std::string& name) {
  if (name == "market") return Protocol::market;
  if (name == "none") return Protocol::none;
  throw std::invalid_argument("unknown protocol '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Guided-fusion re-identification core (tensor joins, losses, "
            "retrieval metrics, k-reciprocal re-ranking)";

  m.def(
      "bilinear_resize",
      [](const Arr& t, int out_h, int out_w) {
        return tensor_to(bilinear_resize(tensor_from(t), out_h, out_w));
      },
      py::arg("tensor"), py::arg("out_h"), py::arg("out_w"));

  m.def(
      "channel_weight",
      [](const Arr& t, const Arr& map) {
        return tensor_to(channel_weight(tensor_from(t), map_from(map)));
      },
      py::arg("tensor"), py::arg("map"));

  m.def(
      "global_avg_pool",
      [](const Arr& t) { return vec_to(global_avg_pool(tensor_from(t))); },
      py::arg("tensor"));

  m.def(
      "saliency_join",
      [](const Arr& tau, const Arr& map) {
        return vec_to(saliency_join(tensor_from(tau), map_from(map)));
      },
      py::arg("tau"), py::arg("map"));

  m.def(
      "parsing_join",
      [](const Arr& tau, const Arr& regions) {
        return vec_to(parsing_join(tensor_from(tau), parsing_from(regions)));
      },
      py::arg("tau"), py::arg("regions"));

  m.def(
      "l2_normalize",
      [](const Arr& v) { return vec_to(l2_normalize(vec_from(v))); },
      py::arg("v"));

  m.def(
      "stream_combine",
      [](const Arr& global, const Arr& guided) {
        return vec_to(stream_output(vec_from(global), vec_from(guided)).combined);
      },
      py::arg("global_feature"), py::arg("guided_feature"),
      "Concatenation of the L2-normalized global and guided features.");

  m.def(
      "ssp_combine",
      [](const Arr& s_combined, const Arr& sp_combined) {
        StreamOutputT<double> s, sp;
        s.combined = vec_from(s_combined);
        sp.combined = vec_from(sp_combined);
        return vec_to(ssp_combine(s, sp));
      },
      py::arg("s_combined"), py::arg("sp_combined"));

  m.def(
      "lsr_target",
      [](int true_class, int num_classes, double epsilon) {
        return vec_to(lsr_target(true_class, num_classes, epsilon));
      },
      py::arg("true_class"), py::arg("num_classes"), py::arg("epsilon"));

  m.def(
      "cross_entropy_lsr",
      [](const Arr& logits, int true_class, double epsilon) {
        auto r = cross_entropy_lsr(vec_from(logits), true_class, epsilon);
        return py::make_tuple(r.loss, vec_to(r.grad));
      },
      py::arg("logits"), py::arg("true_class"), py::arg("epsilon"),
      "Returns (loss, grad_wrt_logits).");

  m.def(
      "triplet_hard",
      [](const Arr& embeddings, int people, int per_person, double margin) {
        TripletBatchT<double> b;
        b.people = people;
        b.per_person = per_person;
        b.margin = margin;
        if (embeddings.ndim() != 2)
          throw std::invalid_argument("expected a (P*N, dim) array");
        for (py::ssize_t i = 0; i < embeddings.shape(0); ++i)
          b.embeddings.emplace_back(
              embeddings.data() + i * embeddings.shape(1),
              embeddings.data() + (i + 1) * embeddings.shape(1));
        auto r = triplet_hard(b);
        py::array_t<double> grads({embeddings.shape(0), embeddings.shape(1)});
        for (py::ssize_t i = 0; i < embeddings.shape(0); ++i)
          std::copy(r.grads[i].begin(), r.grads[i].end(),
                    grads.mutable_data() + i * embeddings.shape(1));
        return py::make_tuple(r.loss, grads);
      },
      py::arg("embeddings"), py::arg("people"), py::arg("per_person"),
      py::arg("margin") = 0.3,
      "Batch-hard triplet loss over a person-major batch; returns (loss, grads).");

  m.def(
      "distance_matrix",
      [](const Arr& queries, const Arr& gallery) {
        return matrix_to(
            distance_matrix(features_from(queries), features_from(gallery)));
      },
      py::arg("queries"), py::arg("gallery"));

  m.def(
      "evaluate",
      [](const Arr& q_features, const std::vector<uint32_t>& q_ids,
         const std::vector<uint16_t>& q_cams, const Arr& g_features,
         const std::vector<uint32_t>& g_ids,
         const std::vector<uint16_t>& g_cams, const std::string& protocol,
         int max_rank) {
        EvalReport r = evaluate(entries_from(q_features, q_ids, q_cams),
                                entries_from(g_features, g_ids, g_cams),
                                protocol_from(protocol), max_rank);
        py::dict out;
        out["map"] = r.map;
        out["rank1"] = r.rank1();
        out["cmc"] = vec_to(r.cmc);
        out["evaluated_queries"] = r.evaluated_queries;
        out["skipped_queries"] = r.skipped_queries;
        return out;
      },
      py::arg("q_features"), py::arg("q_ids"), py::arg("q_cams"),
      py::arg("g_features"), py::arg("g_ids"), py::arg("g_cams"),
      py::arg("protocol") = "market", py::arg("max_rank") = 50);

  m.def(
      "rerank",
      [](const Arr& q_features, const Arr& g_features, int k1, int k2,
         double lambda_) {
        RerankConfig cfg;
        cfg.k1 = k1;
        cfg.k2 = k2;
        cfg.lambda = lambda_;
        return matrix_to(
            rerank(features_from(q_features), features_from(g_features), cfg));
      },
      py::arg("q_features"), py::arg("g_features"), py::arg("k1") = 20,
      py::arg("k2") = 6, py::arg("lambda_") = 0.3);

  m.def("load_saliency", [](const std::string& path) {
    GuidanceMap map = load_saliency(path);
    py::array_t<double> out({map.height, map.width});
    std::copy(map.weights.begin(), map.weights.end(), out.mutable_data());
    return out;
  });

  m.def("load_gallery", [](const std::string& path) {
    auto entries = load_gallery(path);
    size_t dim = entries.empty() ? 0 : entries[0].feature.size();
    py::array_t<double> feats({static_cast<py::ssize_t>(entries.size()),
                               static_cast<py::ssize_t>(dim)});
    std::vector<uint32_t> ids(entries.size());
    std::vector<uint16_t> cams(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
      ids[i] = entries[i].person_id;
      cams[i] = entries[i].camera_id;
      for (size_t j = 0; j < dim; ++j)
        feats.mutable_at(i, j) = entries[i].feature[j];
    }
    return py::make_tuple(feats, ids, cams);
  });

  m.def(
      "save_gallery",
      [](const std::string& path, const Arr& features,
         const std::vector<uint32_t>& ids, const std::vector<uint16_t>& cams) {
        save_gallery(path, entries_from(features, ids, cams));
      },
      py::arg("path"), py::arg("features"), py::arg("ids"), py::arg("cams"));

  py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);
  py::register_exception<protocol_error>(m, "ProtocolError", PyExc_ValueError);
}
