#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "selfir/image.hpp"

namespace selfir {

// Dense NCHW tensor; network math runs on these, images convert in/out.
template <class T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_stride() const { return static_cast<std::size_t>(c) * h * w; }
  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * sample_stride(); }
  const T* sample(int i) const {
    return data.data() + static_cast<std::size_t>(i) * sample_stride();
  }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool empty() const { return data.empty(); }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

// HWC images -> one NCHW batch. All images must share shape.
template <class T>
Tensor<T> images_to_tensor(const std::vector<const Image*>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
  const Image& first = *imgs[0];
  Tensor<T> t(static_cast<int>(imgs.size()), first.channels, first.height, first.width);
  for (int i = 0; i < t.n; ++i) {
    const Image& im = *imgs[i];
    if (!im.same_shape(first)) throw std::invalid_argument("images_to_tensor: shape mismatch");
    T* dst = t.sample(i);
    for (int c = 0; c < t.c; ++c)
      for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
          dst[(static_cast<std::size_t>(c) * t.h + y) * t.w + x] =
              static_cast<T>(im.at(y, x, c));
  }
  return t;
}

template <class T>
Tensor<T> image_to_tensor(const Image& img) {
  return images_to_tensor<T>({&img});
}

template <class T>
Image tensor_to_image(const Tensor<T>& t, int i, ColorSpace cs) {
  if (i < 0 || i >= t.n) throw std::out_of_range("tensor_to_image: bad sample index");
  Image img(t.h, t.w, t.c, cs);
  const T* src = t.sample(i);
  for (int c = 0; c < t.c; ++c)
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x)
        img.at(y, x, c) =
            static_cast<float>(src[(static_cast<std::size_t>(c) * t.h + y) * t.w + x]);
  return img;
}

}  // namespace selfir
