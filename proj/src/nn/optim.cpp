#include "motion6d/nn/optim.hpp"

#include "motion6d/errors.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace motion6d::nn {

RmsProp::RmsProp(ParamList params, Options opts) : params_(std::move(params)), opts_(opts) {
  square_avg_.reserve(params_.size());
  for (const Param* p : params_) square_avg_.emplace_back(p->size(), 0.0f);
}

void RmsProp::zero_grad() {
  for (Param* p : params_) p->zero_grad();
}

void RmsProp::step() {
  const float lr = static_cast<float>(opts_.lr);
  const float alpha = static_cast<float>(opts_.alpha);
  const float eps = static_cast<float>(opts_.eps);
  const float wd = static_cast<float>(opts_.weight_decay);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param& p = *params_[k];
    float* v = square_avg_[k].data();
    const std::size_t n = p.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      const float g = p.grad[i] + wd * p.value[i];
      v[i] = alpha * v[i] + (1.0f - alpha) * g * g;
      p.value[i] -= lr * g / (std::sqrt(v[i]) + eps);
    }
  }
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const Param* p : params) {
    for (float g : p->grad) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const float s = static_cast<float>(max_norm / norm);
    for (Param* p : params) {
      for (float& g : p->grad) g *= s;
    }
  }
  return norm;
}

bool grads_finite(const ParamList& params) {
  for (const Param* p : params) {
    for (float g : p->grad) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

namespace {
constexpr const char* kMagic = "MOTION6D-CHECKPOINT 1";
}

void save_checkpoint(const std::string& path, const std::string& architecture, const ParamList& params) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("cannot write " + tmp);
    os << kMagic << '\n' << "arch " << architecture << '\n' << "params " << params.size() << '\n';
    for (const Param* p : params) os << p->name << ' ' << p->size() << '\n';
    os << "data\n";
    for (const Param* p : params) {
      os.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->size() * sizeof(float)));
    }
    if (!os) throw IoError("short write on " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct Header {
  std::string architecture;
  std::vector<std::pair<std::string, std::size_t>> entries;
};

Header read_header(std::istream& is, const std::string& path) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw IoError(path + ": not a checkpoint");
  Header h;
  if (!std::getline(is, line) || line.rfind("arch ", 0) != 0) throw IoError(path + ": missing arch line");
  h.architecture = line.substr(5);
  std::size_t count = 0;
  if (!std::getline(is, line) || std::sscanf(line.c_str(), "params %zu", &count) != 1) {
    throw IoError(path + ": missing params line");
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw IoError(path + ": truncated header");
    std::istringstream ls(line);
    std::string name;
    std::size_t size = 0;
    if (!(ls >> name >> size)) throw IoError(path + ": bad entry " + line);
    h.entries.emplace_back(name, size);
  }
  if (!std::getline(is, line) || line != "data") throw IoError(path + ": missing data marker");
  return h;
}

}  // namespace

void load_checkpoint(const std::string& path, const std::string& architecture, const ParamList& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  const Header h = read_header(is, path);
  if (h.architecture != architecture) {
    throw IoError(path + ": architecture '" + h.architecture + "' does not match '" + architecture + "'");
  }
  if (h.entries.size() != params.size()) throw IoError(path + ": parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (h.entries[i].first != params[i]->name || h.entries[i].second != params[i]->size()) {
      throw IoError(path + ": parameter mismatch at " + h.entries[i].first);
    }
  }
  for (Param* p : params) {
    is.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->size() * sizeof(float)));
    if (!is) throw IoError(path + ": truncated data");
  }
}

std::string read_checkpoint_architecture(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return read_header(is, path).architecture;
}

}  // namespace motion6d::nn
