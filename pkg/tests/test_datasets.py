import numpy as np
import pytest

from albench.datasets import (
    ArrayImageBank,
    DatasetConfig,
    load_cifar10,
    load_dataset,
    load_folder_manifest,
)
from albench.errors import ConfigError, MissingImageError
from albench.synthetic import SyntheticSpec, make_classification_dataset
from conftest import write_fake_cifar_binary, write_fake_cifar_python


class TestCifarLoaders:
    def test_python_format(self, tmp_path):
        root = write_fake_cifar_python(tmp_path / "py")
        data = load_cifar10(root)
        assert len(data.train) == 200 and len(data.test) == 80
        assert data.class_list[0] == "airplane" and len(data.class_list) == 10
        img = data.bank.get(data.train[0].id)
        assert img.shape == (32, 32, 3) and img.dtype == np.uint8

    def test_binary_format(self, tmp_path):
        root = write_fake_cifar_binary(tmp_path / "bin")
        data = load_cifar10(root)
        assert len(data.train) == 200 and len(data.test) == 80
        assert data.class_list[3] == "cat"

    def test_formats_agree(self, tmp_path):
        py = load_cifar10(write_fake_cifar_python(tmp_path / "py", seed=3))
        bi = load_cifar10(write_fake_cifar_binary(tmp_path / "bin", seed=3))
        np.testing.assert_array_equal(
            py.bank.get_many([s.id for s in py.train]),
            bi.bank.get_many([s.id for s in bi.train]),
        )
        assert [s.true_label for s in py.train] == [s.true_label for s in bi.train]

    def test_class_subset_remaps_labels(self, tmp_path):
        root = write_fake_cifar_python(tmp_path / "py")
        data = load_cifar10(root, classes=(3, 5, 8))
        assert data.class_list == ("cat", "dog", "ship")
        labels = {s.true_label for s in data.train}
        assert labels == {0, 1, 2}
        assert len(data.train) == 3 * 20

    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingImageError):
            load_cifar10(tmp_path / "nothing")


class TestFolderManifest:
    def build_folder(self, tmp_path, n=30):
        from PIL import Image

        rng = np.random.default_rng(0)
        root = tmp_path / "imgs"
        root.mkdir()
        rows = ["relative_path,label"]
        for i in range(n):
            label = "crack" if i % 3 == 0 else "spalling"
            rel = f"{label}/{i:03d}.png"
            (root / label).mkdir(exist_ok=True)
            arr = rng.integers(0, 255, size=(20, 20, 3), dtype=np.uint8)
            Image.fromarray(arr).save(root / rel)
            rows.append(f"{rel},{label}")
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("\n".join(rows) + "\n")
        return root, manifest

    def test_loads_and_splits(self, tmp_path):
        root, manifest = self.build_folder(tmp_path)
        data = load_folder_manifest(root, manifest, train_fraction=0.7, seed=0)
        assert data.class_list == ("crack", "spalling")
        assert len(data.train) + len(data.test) == 30
        img = data.bank.get(data.train[0].id)
        assert img.shape == (20, 20, 3)

    def test_patch_manifest_columns(self, tmp_path):
        from PIL import Image

        root = tmp_path / "patches"
        (root / "crack").mkdir(parents=True)
        rows = ["patch_path,source_image,cx,cy,category"]
        for i in range(8):
            rel = f"crack/p{i}.png"
            Image.new("RGB", (16, 16), (i * 10, 0, 0)).save(root / rel)
            rows.append(f"{rel},src.png,{i},{i},crack")
        (root / "bg").mkdir()
        for i in range(8):
            rel = f"bg/b{i}.png"
            Image.new("RGB", (16, 16), (0, i * 10, 0)).save(root / rel)
            rows.append(f"{rel},src.png,{i},{i},Background")
        manifest = tmp_path / "patch_manifest.csv"
        manifest.write_text("\n".join(rows) + "\n")
        data = load_folder_manifest(root, manifest, train_fraction=0.5, seed=1)
        assert set(data.class_list) == {"crack", "Background"}

    def test_bad_columns_rejected(self, tmp_path):
        manifest = tmp_path / "bad.csv"
        manifest.write_text("foo,bar\n1,2\n")
        with pytest.raises(ConfigError):
            load_folder_manifest(tmp_path, manifest)


class TestSyntheticDataset:
    def test_shapes_and_determinism(self):
        spec = SyntheticSpec(n_classes=3, image_size=16, train_per_class=10, test_per_class=4, seed=9)
        a = make_classification_dataset(spec)
        b = make_classification_dataset(spec)
        assert len(a.train) == 30 and len(a.test) == 12
        np.testing.assert_array_equal(
            a.bank.get_many([s.id for s in a.train]),
            b.bank.get_many([s.id for s in b.train]),
        )

    def test_tint_gives_class_signal(self):
        # strong tint: per-class mean colors must separate
        spec = SyntheticSpec(
            n_classes=3, image_size=16, train_per_class=30, test_per_class=5,
            tint_min=0.5, tint_max=0.5, mode_strength=0.1, noise_sigma=0.05, seed=1,
        )
        data = make_classification_dataset(spec)
        images = data.bank.get_many([s.id for s in data.train]).astype(float)
        labels = np.array([s.true_label for s in data.train])
        means = np.stack([images[labels == k].mean(axis=(0, 1, 2)) for k in range(3)])
        gaps = [np.abs(means[i] - means[j]).max() for i in range(3) for j in range(i + 1, 3)]
        assert min(gaps) > 20

    def test_via_dataset_config(self):
        config = DatasetConfig(
            kind="synthetic",
            synthetic={"n_classes": 2, "image_size": 12, "train_per_class": 6,
                       "test_per_class": 3, "seed": 2},
        )
        data = load_dataset(config, split_seed=0)
        assert data.class_list == ("class0", "class1")


def test_array_bank_lookup():
    images = np.arange(2 * 4 * 4 * 3, dtype=np.uint8).reshape(2, 4, 4, 3)
    bank = ArrayImageBank(["a", "b"], images)
    np.testing.assert_array_equal(bank.get("b"), images[1])
    np.testing.assert_array_equal(bank.get_many(["b", "a"]), images[[1, 0]])


def test_dataset_config_validation():
    with pytest.raises(ConfigError):
        DatasetConfig(kind="webcam")
    with pytest.raises(ConfigError):
        DatasetConfig(kind="folder", train_fraction=1.5)
