#include "pathosyn/tensor_bridge.hpp"

namespace pathosyn {

torch::Tensor to_tensor(const LesionMask& m, torch::Dtype dtype) {
  auto t = torch::empty({1, 1, m.height(), m.width()}, torch::TensorOptions().dtype(torch::kUInt8));
  std::copy(m.bits().begin(), m.bits().end(), t.data_ptr<std::uint8_t>());
  return t.to(dtype);
}

}  // namespace pathosyn
