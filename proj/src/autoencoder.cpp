// Copyright 2026 The ctxbench Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ctxbench/autoencoder.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ctxbench/errors.hpp"
#include "ctxbench/hashing.hpp"

namespace ctxbench {

namespace {

std::vector<LayerSpec> encoder_specs(int input, const AutoencoderConfig& cfg) {
  std::vector<LayerSpec> specs;
  int prev = input;
  for (const int h : cfg.hidden) {
    specs.push_back({prev, h, Activation::kRelu, true, cfg.dropout});
    prev = h;
  }
  specs.push_back({prev, cfg.latent, Activation::kLinear, false, 0.0});
  return specs;
}

std::vector<LayerSpec> decoder_specs(int input, const AutoencoderConfig& cfg) {
  std::vector<LayerSpec> specs;
  int prev = cfg.latent;
  for (auto it = cfg.hidden.rbegin(); it != cfg.hidden.rend(); ++it) {
    specs.push_back({prev, *it, Activation::kRelu, true, cfg.dropout});
    prev = *it;
  }
  specs.push_back({prev, input, Activation::kLinear, false, 0.0});
  return specs;
}

void write_hexfloat(std::ostream& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  out << buf;
}

void write_net(std::ostream& out, const char* name, const DenseNet& net) {
  out << name << ' ' << net.layers.size() << '\n';
  for (const auto& layer : net.layers) {
    out << "layer " << layer.spec.in << ' ' << layer.spec.out << ' '
        << (layer.spec.activation == Activation::kRelu ? "relu" : "linear") << ' '
        << (layer.spec.layer_norm ? 1 : 0) << ' ';
    write_hexfloat(out, layer.spec.dropout);
    out << '\n';
    std::vector<double> flat;
    DenseNet single;
    single.layers.push_back(layer);
    append_parameters(single, &flat);
    out << "params " << flat.size();
    for (const double v : flat) {
      out << ' ';
      write_hexfloat(out, v);
    }
    out << '\n';
  }
}

double read_double_token(std::istream& in, const char* what) {
  std::string tok;
  if (!(in >> tok)) throw ParseError(std::string("checkpoint: missing ") + what);
  return std::strtod(tok.c_str(), nullptr);
}

DenseNet read_net(std::istream& in, const char* name) {
  std::string tag;
  size_t n_layers = 0;
  in >> tag >> n_layers;
  if (tag != name) throw ParseError("checkpoint: expected section " + std::string(name));
  DenseNet net;
  for (size_t i = 0; i < n_layers; ++i) {
    std::string layer_tag, act;
    LayerSpec spec;
    int ln = 0;
    in >> layer_tag >> spec.in >> spec.out >> act >> ln;
    spec.dropout = read_double_token(in, "dropout");
    if (layer_tag != "layer") throw ParseError("checkpoint: malformed layer header");
    spec.activation = act == "relu" ? Activation::kRelu : Activation::kLinear;
    spec.layer_norm = ln != 0;
    DenseLayer layer;
    layer.spec = spec;
    layer.w.resize(spec.in, spec.out);
    layer.b = Vector::Zero(spec.out);
    if (spec.layer_norm) {
      layer.gamma = Vector::Ones(spec.out);
      layer.beta = Vector::Zero(spec.out);
    }
    std::string params_tag;
    size_t count = 0;
    in >> params_tag >> count;
    if (params_tag != "params") throw ParseError("checkpoint: malformed params header");
    std::vector<double> flat(count);
    for (size_t p = 0; p < count; ++p) flat[p] = read_double_token(in, "parameter");
    DenseNet single;
    single.layers.push_back(std::move(layer));
    read_parameters(&single, flat, 0);
    net.layers.push_back(std::move(single.layers[0]));
  }
  return net;
}

void write_vector(std::ostream& out, const char* name, const std::vector<double>& v) {
  out << name << ' ' << v.size();
  for (const double x : v) {
    out << ' ';
    write_hexfloat(out, x);
  }
  out << '\n';
}

std::vector<double> read_vector(std::istream& in, const char* name) {
  std::string tag;
  size_t n = 0;
  in >> tag >> n;
  if (tag != name) throw ParseError("checkpoint: expected vector " + std::string(name));
  std::vector<double> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = read_double_token(in, name);
  return v;
}

void serialize_autoencoder(const Autoencoder& model, std::ostream& out) {
  out << "ctxbench-autoencoder v1\n";
  out << "axis " << axis_name(model.axis) << '\n';
  out << "agent_type " << agent_type_name(model.agent_type) << '\n';
  out << "schema_hash " << hash_hex(model.schema_hash) << '\n';
  out << "seed " << model.seed << '\n';
  out << "split_hash " << hash_hex(model.split_hash) << '\n';
  write_vector(out, "std_mean", model.standardizer.mean);
  write_vector(out, "std_stddev", model.standardizer.stddev);
  out << "std_exempt " << model.standardizer.exempt.size();
  for (const auto e : model.standardizer.exempt) out << ' ' << static_cast<int>(e);
  out << '\n';
  write_net(out, "encoder", model.encoder);
  write_net(out, "decoder", model.decoder);
}

}  // namespace

Matrix Autoencoder::encode(const std::vector<std::vector<double>>& rows) const {
  if (rows.empty()) throw ContractError("encode: no rows");
  Matrix x(rows.size(), rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const std::vector<double> z = standardizer.apply(rows[i]);
    for (size_t j = 0; j < z.size(); ++j) x(static_cast<int>(i), static_cast<int>(j)) = z[j];
  }
  return encoder.forward(x, /*training=*/false, nullptr);
}

Matrix Autoencoder::reconstruct(const Matrix& standardized) const {
  const Matrix z = encoder.forward(standardized, false, nullptr);
  return decoder.forward(z, false, nullptr);
}

TrainedAutoencoder train_autoencoder(const std::vector<std::vector<double>>& vectors, Axis axis,
                                     AgentType agent_type, const GroupSchema& schema,
                                     const AutoencoderConfig& config, uint64_t seed,
                                     uint64_t split_hash) {
  const int n = static_cast<int>(vectors.size());
  if (n < config.min_samples) {
    throw ContractError("train_autoencoder: need >= " + std::to_string(config.min_samples) +
                        " vectors, got " + std::to_string(n));
  }
  for (const auto& row : vectors) {
    if (static_cast<int>(row.size()) != schema.width) {
      throw ContractError("train_autoencoder: row width does not match schema");
    }
  }

  TrainedAutoencoder out;
  Autoencoder& model = out.model;
  model.axis = axis;
  model.agent_type = agent_type;
  model.schema_hash = schema.hash;
  model.seed = seed;
  model.split_hash = split_hash;
  model.standardizer.fit(vectors, schema.valid_bit_indices);

  Matrix x(n, schema.width);
  for (int i = 0; i < n; ++i) {
    const std::vector<double> z = model.standardizer.apply(vectors[i]);
    for (int j = 0; j < schema.width; ++j) x(i, j) = z[j];
  }

  Rng init_rng(Rng::substream(seed, "ae_init"));
  model.encoder = DenseNet::create(encoder_specs(schema.width, config), init_rng);
  model.decoder = DenseNet::create(decoder_specs(schema.width, config), init_rng);
  out.dec.centroids = Matrix::Zero(config.dec_clusters, config.latent);

  const int enc_n = model.encoder.parameter_count();
  const int dec_n = model.decoder.parameter_count();
  const int cent_n = static_cast<int>(out.dec.centroids.size());
  SgdMomentum optimizer(static_cast<size_t>(enc_n + dec_n + cent_n), config.momentum);

  auto gather_params = [&]() {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(enc_n + dec_n + cent_n));
    append_parameters(model.encoder, &flat);
    append_parameters(model.decoder, &flat);
    flat.insert(flat.end(), out.dec.centroids.data(), out.dec.centroids.data() + cent_n);
    return flat;
  };
  auto scatter_params = [&](const std::vector<double>& flat) {
    size_t off = read_parameters(&model.encoder, flat, 0);
    off = read_parameters(&model.decoder, flat, off);
    std::copy(flat.begin() + off, flat.end(), out.dec.centroids.data());
  };

  Rng train_rng(Rng::substream(seed, "ae_train"));
  std::vector<int> indices(n);
  std::iota(indices.begin(), indices.end(), 0);

  const int warmup_epochs =
      std::min(config.epochs, static_cast<int>(std::ceil(config.warmup_frac * config.epochs)));
  Matrix p_full;  // target distribution over the whole dataset
  bool dec_active = false;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr * std::pow(config.lr_decay, epoch / std::max(1, config.lr_step));

    if (config.lambda_dec > 0.0 && epoch >= warmup_epochs) {
      if (!dec_active) {
        const Matrix latents = model.encoder.forward(x, false, nullptr);
        const KMeansResult km = kmeans(latents, config.dec_clusters,
                                       Rng::substream(seed, "ae_dec_init"));
        out.dec.centroids = km.centroids;
        dec_active = true;
        p_full = dec_target(dec_soft_assignment(latents, out.dec.centroids));
      } else if ((epoch - warmup_epochs) % std::max(1, config.p_refresh) == 0) {
        const Matrix latents = model.encoder.forward(x, false, nullptr);
        p_full = dec_target(dec_soft_assignment(latents, out.dec.centroids));
      }
    }

    train_rng.shuffle(indices);
    double epoch_total = 0.0, epoch_recon = 0.0, epoch_dec = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += config.batch) {
      const int b = std::min(config.batch, n - start);
      Matrix xb(b, schema.width);
      for (int i = 0; i < b; ++i) xb.row(i) = x.row(indices[start + i]);

      ForwardCache enc_cache, dec_cache;
      const Matrix z = model.encoder.forward(xb, true, &train_rng, &enc_cache);
      const Matrix recon = model.decoder.forward(z, true, &train_rng, &dec_cache);

      const LossResult mse = mse_loss(recon, xb);
      NetGrads dec_grads;
      Matrix dz = model.decoder.backward(dec_cache, mse.grad, &dec_grads);

      double kl_value = 0.0;
      Matrix d_centroids = Matrix::Zero(out.dec.centroids.rows(), out.dec.centroids.cols());
      if (dec_active) {
        Matrix pb(b, p_full.cols());
        for (int i = 0; i < b; ++i) pb.row(i) = p_full.row(indices[start + i]);
        const Matrix qb = dec_soft_assignment(z, out.dec.centroids);
        kl_value = dec_kl(pb, qb);
        Matrix dz_dec;
        dec_kl_backward(z, out.dec.centroids, pb, &dz_dec, &d_centroids);
        dz += config.lambda_dec * dz_dec;
        d_centroids *= config.lambda_dec;
      }

      NetGrads enc_grads;
      model.encoder.backward(enc_cache, dz, &enc_grads);

      std::vector<double> flat_grads;
      flat_grads.reserve(static_cast<size_t>(enc_n + dec_n + cent_n));
      append_gradients(enc_grads, &flat_grads);
      append_gradients(dec_grads, &flat_grads);
      flat_grads.insert(flat_grads.end(), d_centroids.data(), d_centroids.data() + cent_n);

      std::vector<double> flat = gather_params();
      optimizer.step(&flat, flat_grads, lr);
      scatter_params(flat);

      epoch_recon += mse.value;
      epoch_dec += kl_value;
      epoch_total += mse.value + config.lambda_dec * kl_value;
      ++batches;
    }
    out.log.total_loss.push_back(epoch_total / batches);
    out.log.recon_loss.push_back(epoch_recon / batches);
    out.log.dec_loss.push_back(epoch_dec / batches);
  }

  if (!dec_active) {
    // Pure-MSE runs still expose latent-space centroids for downstream use.
    const Matrix latents = model.encoder.forward(x, false, nullptr);
    out.dec.centroids =
        kmeans(latents, config.dec_clusters, Rng::substream(seed, "ae_dec_init")).centroids;
  }
  return out;
}

void ModelRegistry::add(Autoencoder model) {
  const auto key = std::make_pair(model.axis, model.agent_type);
  if (models_.count(key) > 0) {
    throw ContractError(std::string("ModelRegistry: duplicate model for (") +
                        axis_name(model.axis) + ", " + agent_type_name(model.agent_type) + ")");
  }
  models_.emplace(key, std::move(model));
}

const Autoencoder& ModelRegistry::get(Axis axis, AgentType type) const {
  const auto it = models_.find(std::make_pair(axis, type));
  if (it == models_.end()) {
    throw ContractError(std::string("ModelRegistry: no model for (") + axis_name(axis) + ", " +
                        agent_type_name(type) + ")");
  }
  return it->second;
}

bool ModelRegistry::has(Axis axis, AgentType type) const {
  return models_.count(std::make_pair(axis, type)) > 0;
}

void save_autoencoder(const Autoencoder& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  serialize_autoencoder(model, out);
}

Autoencoder load_autoencoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint: " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "ctxbench-autoencoder" || version != "v1") {
    throw ParseError("checkpoint: bad header in " + path);
  }
  Autoencoder model;
  std::string tag, value;
  in >> tag >> value;
  model.axis = value == "ego" ? Axis::kEgo : Axis::kSocial;
  in >> tag >> value;
  model.agent_type = agent_type_from_name(value);
  in >> tag >> value;
  model.schema_hash = std::stoull(value, nullptr, 16);
  in >> tag >> value;
  model.seed = std::stoull(value);
  in >> tag >> value;
  model.split_hash = std::stoull(value, nullptr, 16);
  model.standardizer.mean = read_vector(in, "std_mean");
  model.standardizer.stddev = read_vector(in, "std_stddev");
  size_t n_exempt = 0;
  in >> tag >> n_exempt;
  if (tag != "std_exempt") throw ParseError("checkpoint: expected std_exempt");
  model.standardizer.exempt.resize(n_exempt);
  for (size_t i = 0; i < n_exempt; ++i) {
    int e = 0;
    in >> e;
    model.standardizer.exempt[i] = static_cast<uint8_t>(e);
  }
  model.encoder = read_net(in, "encoder");
  model.decoder = read_net(in, "decoder");
  return model;
}

uint64_t autoencoder_fingerprint(const Autoencoder& model) {
  std::ostringstream os;
  serialize_autoencoder(model, os);
  return fnv1a64(os.str());
}

}  // namespace ctxbench
