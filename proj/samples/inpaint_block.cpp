// Masks half the pixels of a synthetic 128x128 image and reconstructs it
// with each algorithm. Pass a BMP path to use your own image instead.

#include <cstdio>

#include "csrecon/csrecon.hpp"

int main(int argc, char** argv) {
  using namespace csrecon;
  Image image(128, 128);
  if (argc > 1) {
    image = load_grayscale(argv[1]);
  } else {
    for (Index i = 0; i < image.height(); ++i) {
      for (Index j = 0; j < image.width(); ++j) {
        const bool disc = (i - 64) * (i - 64) + (j - 60) * (j - 60) < 30 * 30;
        image.pixels(i, j) = disc ? 190.0 : 40.0 + 0.5 * static_cast<double>(j);
      }
    }
  }

  const PixelMask mask = make_mask(image.height(), image.width(), 0.5, 1);
  const ReconConfig config;
  for (Algorithm algorithm : kAllAlgorithms) {
    const ReconResult r = reconstruct_image(image, mask, algorithm, config);
    std::printf("%-9s %6.2f dB  %5.2f s\n", std::string(to_string(algorithm)).c_str(), r.report.psnr_db,
                r.report.wall_time_s);
  }
  return 0;
}
