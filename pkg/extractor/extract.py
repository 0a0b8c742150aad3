#!/usr/bin/env python3
"""Export frozen-backbone image features to the binary feature format.

Runs a pretrained 18-layer residual network in eval mode over an image
classification dataset and writes one row of penultimate-layer
activations (after global pooling, no further normalization) per
image, followed by the integer labels. The output follows the FEAT
byte layout exactly:

    "FEAT" | version 0x01 | n u32 | d u32 | c u32   (little-endian)
    n * d  float32 features, row-major
    n      u32 labels

Usage:
    extract.py --dataset cifar10 --split train --out train.feat
    extract.py --dataset image_folder --data-dir photos --split train \
               --weights none --out photos.feat

No training, no augmentation; iteration order is the dataset's natural
order, so repeated runs produce byte-identical files. Output is
written atomically (temp file + rename).
"""

import argparse
import os
import struct
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
from torchvision import datasets, models, transforms

MAGIC = b"FEAT"
VERSION = 1
FEATURE_DIM = 512  # penultimate width of the 18-layer residual net

# input preprocessing for the ImageNet-pretrained backbone; this is part
# of the backbone contract, distinct from (absent) feature normalization
_NORMALIZE = transforms.Normalize(mean=[0.485, 0.456, 0.406],
                                  std=[0.229, 0.224, 0.225])


def build_backbone(weights: str) -> torch.nn.Module:
    """Residual-18 with the classifier head removed; forward yields the
    pooled 512-d features."""
    if weights == "imagenet":
        model = models.resnet18(weights=models.ResNet18_Weights.IMAGENET1K_V1)
    elif weights == "none":
        # seeded random init: only for offline plumbing tests, stated in --help
        torch.manual_seed(0)
        model = models.resnet18(weights=None)
    else:
        model = models.resnet18(weights=None)
        state = torch.load(weights, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
    model.fc = torch.nn.Identity()
    model.eval()
    return model


def build_dataset(name: str, split: str, data_dir: Path, image_size: int):
    to_rgb = [transforms.Grayscale(num_output_channels=3)] if name == "fashion_mnist" else []
    tf = transforms.Compose([
        *to_rgb,
        transforms.Resize((image_size, image_size)),
        transforms.ToTensor(),
        _NORMALIZE,
    ])
    if name == "cifar10":
        return datasets.CIFAR10(str(data_dir), train=(split == "train"), download=True,
                                transform=tf), 10
    if name == "fashion_mnist":
        return datasets.FashionMNIST(str(data_dir), train=(split == "train"), download=True,
                                     transform=tf), 10
    root = data_dir / split
    if not root.is_dir():
        root = data_dir
    ds = datasets.ImageFolder(str(root), transform=tf)
    return ds, len(ds.classes)


def extract_features(dataset, model, batch_size: int, device: str):
    loader = torch.utils.data.DataLoader(dataset, batch_size=batch_size,
                                         shuffle=False, num_workers=0)
    feats = []
    labels = []
    model.to(device)
    with torch.no_grad():
        for images, targets in loader:
            out = model(images.to(device))
            if out.ndim != 2 or out.shape[1] != FEATURE_DIM:
                raise RuntimeError(f"unexpected feature shape {tuple(out.shape)}")
            feats.append(out.cpu().numpy().astype("<f4"))
            labels.append(np.asarray(targets, dtype="<u4"))
    return np.vstack(feats), np.concatenate(labels)


def write_feature_file(path: Path, features: np.ndarray, labels: np.ndarray,
                       num_classes: int) -> None:
    n, d = features.shape
    if labels.shape != (n,):
        raise RuntimeError("one label per feature row required")
    if labels.size and int(labels.max()) >= num_classes:
        raise RuntimeError(f"label {int(labels.max())} out of range for c={num_classes}")
    payload = (MAGIC + bytes([VERSION]) + struct.pack("<III", n, d, num_classes)
               + features.astype("<f4").tobytes(order="C")
               + labels.astype("<u4").tobytes())
    fd, tmp_name = tempfile.mkstemp(dir=str(path.parent or Path(".")), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--dataset", required=True,
                        choices=("cifar10", "fashion_mnist", "image_folder"))
    parser.add_argument("--split", default="train", choices=("train", "test"))
    parser.add_argument("--out", required=True, help="output feature file")
    parser.add_argument("--data-dir", default="datasets",
                        help="dataset cache dir, or the image-folder root")
    parser.add_argument("--weights", default="imagenet",
                        help="'imagenet', a state-dict .pth path, or 'none' "
                             "(seeded random init, for offline tests)")
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--image-size", type=int, default=224,
                        help="backbone input resolution")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        dataset, num_classes = build_dataset(args.dataset, args.split,
                                             Path(args.data_dir), args.image_size)
        model = build_backbone(args.weights)
        features, labels = extract_features(dataset, model, args.batch_size, args.device)
        write_feature_file(out, features, labels, num_classes)
    except Exception as exc:  # noqa: BLE001 - surface everything with a clean exit
        print(f"extract failed: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}: n={features.shape[0]} d={features.shape[1]} c={num_classes}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
