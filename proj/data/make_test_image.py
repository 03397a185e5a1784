"""Regenerates test_image.bmp, the 200x200 8-bit grayscale benchmark image.

Source: the `rocket` sample bundled with scikit-image (launch of DSCOVR on
Falcon 9, photographed by SpaceX and released into the public domain).
Center square crop, luma conversion, anti-aliased resize to 200x200.
"""

import pathlib

import numpy as np
from PIL import Image
from skimage import color, data, transform, util


def main() -> None:
    rgb = data.rocket()
    gray = util.img_as_float(color.rgb2gray(rgb[..., :3]))
    h, w = gray.shape
    side = min(h, w)
    top, left = (h - side) // 2, (w - side) // 2
    square = gray[top : top + side, left : left + side]
    small = transform.resize(square, (200, 200), anti_aliasing=True)
    pixels = np.clip(np.round(small * 255), 0, 255).astype(np.uint8)
    out = pathlib.Path(__file__).with_name("test_image.bmp")
    Image.fromarray(pixels, "L").save(out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
