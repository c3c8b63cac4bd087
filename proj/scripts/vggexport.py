#!/usr/bin/env python3
"""Export the VGG16 convolution prefix (conv1_1 .. conv2_2) to PWB1 and emit
relu2_2 reference activations as PLT1 fixtures.

Weights are read from the flax checkpoint bundled with the `lpips-jax` sdist
on PyPI (`lpips_jax/weights/vgg16.ckpt`), which carries the torchvision
ImageNet VGG16 convolution weights in HWIO layout.

    pip download --no-deps --no-binary :all: lpips-jax==0.1.0
    python3 scripts/vggexport.py --source path/to/vgg16.ckpt \
        --out data/vgg16_relu2_2.pwb --fixtures data/fixtures
"""

import argparse
import pathlib
import pickle
import struct
import zlib

import numpy as np

LAYERS = [
    ("conv1_1", 3, 64),
    ("conv1_2", 64, 64),
    ("conv2_1", 64, 128),
    ("conv2_2", 128, 128),
]
SOURCE_ID = "torchvision-vgg16-imagenet (lpips-jax 0.1.0 weights/vgg16.ckpt)"


def load_layers(source):
    with open(source, "rb") as fh:
        params = pickle.load(fh)["VGG16_0"]
    layers = []
    for i, (name, cin, cout) in enumerate(LAYERS):
        hwio = np.asarray(params[f"Conv_{i}"]["kernel"], dtype=np.float32)
        bias = np.asarray(params[f"Conv_{i}"]["bias"], dtype=np.float32)
        if hwio.shape != (3, 3, cin, cout) or bias.shape != (cout,):
            raise SystemExit(f"{name}: unexpected shape {hwio.shape} / {bias.shape}")
        # HWIO -> OIHW; cross-correlation orientation is preserved.
        oihw = np.ascontiguousarray(hwio.transpose(3, 2, 0, 1))
        layers.append((name, cin, cout, oihw, bias))
    return layers


def write_pwb(path, layers, meta):
    blobs = []
    offset = 0
    lines = [f"PWB1 {len(layers)}"]
    for key, value in meta.items():
        lines.append(f"meta {key} {value}")
    for name, cin, cout, kernel, bias in layers:
        blob = kernel.astype("<f4").tobytes() + bias.astype("<f4").tobytes()
        crc = zlib.crc32(blob) & 0xFFFFFFFF
        lines.append(f"layer {name} {cin} {cout} 3 3 {offset} {crc:08x}")
        blobs.append(blob)
        offset += len(blob)
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for blob in blobs:
            fh.write(blob)


def write_plt(path, array, dtype="f32"):
    np_dtype = {"f32": "<f4", "f64": "<f8"}[dtype]
    header = f"PLT1 {dtype} {array.ndim} " + " ".join(str(d) for d in array.shape) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(array, dtype=np_dtype).tobytes())


def conv_same(x, kernel, bias):
    c, h, w = x.shape
    padded = np.zeros((c, h + 2, w + 2))
    padded[:, 1:-1, 1:-1] = x
    out = np.empty((kernel.shape[0], h, w))
    for o in range(kernel.shape[0]):
        acc = np.full((h, w), float(bias[o]))
        for dy in range(3):
            for dx in range(3):
                acc += np.tensordot(kernel[o, :, dy, dx], padded[:, dy:dy + h, dx:dx + w], axes=1)
        out[o] = acc
    return out


def relu2_2(x, layers):
    k = [(l[3].astype(np.float64), l[4].astype(np.float64)) for l in layers]
    x = np.maximum(conv_same(x, *k[0]), 0)
    x = np.maximum(conv_same(x, *k[1]), 0)
    c, h, w = x.shape
    x = x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))
    x = np.maximum(conv_same(x, *k[2]), 0)
    return np.maximum(conv_same(x, *k[3]), 0)


def probes():
    yy, xx = np.mgrid[0:32, 0:32]
    gradient = np.stack([-1.0 + 2.0 * ((xx * (c + 1) + yy * (3 - c)) % 32) / 31.0 for c in range(3)])
    import skimage.data

    cam = skimage.data.camera().astype(np.float64)
    crop = cam.reshape(32, 16, 32, 16).mean(axis=(1, 3))
    crop = 2.0 * (crop - crop.min()) / (crop.max() - crop.min()) - 1.0
    natural = np.stack([crop] * 3)
    return {"gradient": gradient, "natural": natural}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--source", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--fixtures", required=True)
    args = ap.parse_args()

    layers = load_layers(args.source)
    write_pwb(args.out, layers, {"source": SOURCE_ID.replace(" ", "_"), "tap": "relu2_2"})

    out_dir = pathlib.Path(args.fixtures)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, probe in probes().items():
        write_plt(out_dir / f"probe_{name}.plt", probe.astype(np.float32))
        # Reference computed in float64 from the float32 probe actually stored.
        feats = relu2_2(probe.astype(np.float32).astype(np.float64), layers)
        write_plt(out_dir / f"fixture_{name}_relu2_2.plt", feats.astype(np.float32))


if __name__ == "__main__":
    main()
