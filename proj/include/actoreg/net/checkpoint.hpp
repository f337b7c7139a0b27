#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "actoreg/compute/tensor.hpp"

namespace actoreg::net {

// Self-describing binary snapshot: string metadata plus named float32
// tensors in insertion order. One file may hold several modules, each under
// its own name prefix.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, std::pair<compute::Shape, std::vector<float>>>> tensors;

    void add(const std::string& name, const compute::Tensor& t);
    void add_raw(const std::string& name, compute::Shape shape, std::vector<float> data);
    const std::pair<compute::Shape, std::vector<float>>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);  // throws io_error

// Snapshot / restore a module's named tensors under a prefix. Restore copies
// values in place and throws io_error on a missing name or shape mismatch.
void store_module(Checkpoint& ck, const std::string& prefix,
                  const std::vector<std::pair<std::string, compute::Tensor>>& named);
void restore_module(const Checkpoint& ck, const std::string& prefix,
                    std::vector<std::pair<std::string, compute::Tensor>> named);

}  // namespace actoreg::net
