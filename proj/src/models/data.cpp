#include "maeguard/models/data.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace maeguard::models {

std::span<const double> ImageSet::image(std::size_t i) const {
  return std::span<const double>(pixels).subspan(i * image_size(), image_size());
}

std::span<double> ImageSet::image(std::size_t i) {
  return std::span<double>(pixels).subspan(i * image_size(), image_size());
}

ad::Tensor ImageSet::batch(std::size_t first, std::size_t count) const {
  if (first + count > size()) {
    throw std::out_of_range("image batch [" + std::to_string(first) + "," +
                            std::to_string(first + count) + ") exceeds " +
                            std::to_string(size()) + " images");
  }
  const auto begin = pixels.begin() + static_cast<std::ptrdiff_t>(first * image_size());
  return ad::Tensor({count, height, width, channels},
                    std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * image_size())));
}

ad::Tensor ImageSet::gather(std::span<const std::size_t> indices) const {
  std::vector<double> data;
  data.reserve(indices.size() * image_size());
  for (auto i : indices) {
    auto img = image(i);
    data.insert(data.end(), img.begin(), img.end());
  }
  return ad::Tensor({indices.size(), height, width, channels}, std::move(data));
}

std::vector<int> ImageSet::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

ImageSet ImageSet::subset(std::span<const std::size_t> indices) const {
  ImageSet out{height, width, channels, {}, {}};
  out.pixels.reserve(indices.size() * image_size());
  for (auto i : indices) {
    auto img = image(i);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    if (!labels.empty()) out.labels.push_back(labels.at(i));
  }
  return out;
}

void ImageSet::append(std::span<const double> img, int label) {
  if (img.size() != image_size()) {
    throw std::invalid_argument("image set: appended image has " + std::to_string(img.size()) +
                                " values, expected " + std::to_string(image_size()));
  }
  pixels.insert(pixels.end(), img.begin(), img.end());
  labels.push_back(label);
}

}  // namespace maeguard::models
