import os
import tempfile
import unittest

import lesanet

DATA = os.environ.get("LESANET_DATA_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "data"))


def data(name):
    return os.path.join(DATA, name)


class OntologyTest(unittest.TestCase):
    def setUp(self):
        self.onto = lesanet.Ontology.load(data("chest_abdomen.onto"))

    def test_expand_right_mid_lung(self):
        self.assertEqual(self.onto.expand(["right mid lung"]), ["chest", "lung", "right lung", "right mid lung"])

    def test_synonyms_and_parents(self):
        self.assertIsNone(self.onto.find("right middle lobe"))
        mined = lesanet.mine_sentence("Nodule in the right middle lobe BOOKMARK.", self.onto)
        self.assertIn(("right mid lung", "relevant"), mined)
        self.assertEqual(self.onto.parents("lung nodule"), ["lung", "nodule"])

    def test_closure_inherits_exclusivity(self):
        pairs = set(self.onto.closure())
        self.assertIn(("left lower lobe", "right mid lung"), pairs)
        self.assertEqual(len(pairs), 22)
        self.assertIn("liver", self.onto.reliable_negatives(["lung"]))

    def test_cycle_reported(self):
        with open(data("cyclic.onto")) as f:
            problems = lesanet.validate_ontology(f.read())
        self.assertTrue(any("cycle" in p for p in problems))

    def test_unknown_label(self):
        with self.assertRaises(KeyError):
            self.onto.expand(["spleen"])


class MiningTest(unittest.TestCase):
    def test_relevance_examples(self):
        onto = lesanet.Ontology.load(data("chest_abdomen.onto"))
        rows = lesanet.mine_sentence("Bilateral adenopathy or mass BOOKMARK.", onto)
        self.assertEqual(rows, [("adenopathy", "uncertain"), ("mass", "uncertain")])
        with self.assertRaises(lesanet.MiningError):
            lesanet.mine_sentence("no bookmark here", onto)

    def test_tokenize(self):
        self.assertEqual(lesanet.tokenize("Nodules; enlarged", True), ["nodule", ";", "enlarged"])


class MetricsTest(unittest.TestCase):
    def test_auc_and_calibration(self):
        self.assertAlmostEqual(lesanet.auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]), 0.75)
        self.assertIsNone(lesanet.auc([0.1, 0.2], [1, 1]))
        t = lesanet.calibrate_threshold([0.9, 0.9, 0.1, 0.1], [1, 1, 0, 0])
        self.assertTrue(0.1 < t <= 0.9)

    def test_acg_and_retrieve(self):
        self.assertAlmostEqual(lesanet.acg([0, 1], [[0, 1], [1], [2]], 5, 3), 1.0)
        idx = lesanet.retrieve([0.0, 0.0], "p0", [[0.0, 0.0], [1.0, 0.0], [0.5, 0.0]], ["p0", "p1", "p2"], 2)
        self.assertEqual(idx, [2, 1])


class PipelineTest(unittest.TestCase):
    def test_fit_and_evaluate(self):
        cfg = lesanet.RunConfig([
            "run.seed=3", "paths.ontology=" + data("synthetic40.onto"), "gen.patients=200", "gen.dim=8",
            "vocab.min_train=5", "vocab.min_val=1", "vocab.min_test=1", "model.hidden=16", "model.embedding=8",
            "train.schedule=2:0.05", "loss.rhem_draws=500", "loss.triplets=200",
        ])
        onto = lesanet.Ontology.load(cfg.ontology_path)
        ds = lesanet.generate(onto, cfg)
        self.assertEqual(ds.to_tsv(), lesanet.generate(onto, cfg).to_tsv())
        self.assertEqual(ds.features().shape, (len(ds), 8))
        ckpt = lesanet.fit(ds, cfg)
        self.assertEqual(lesanet.Checkpoint.from_text(ckpt.to_text()).to_text(), ckpt.to_text())
        rep = lesanet.evaluate(ds, ckpt, cfg)
        self.assertIn("clean", rep)
        self.assertGreater(rep["clean"]["macro_auc"], 0.5)
        self.assertIn("acg@5", rep["mined"])

    def test_commands(self):
        with tempfile.TemporaryDirectory() as tmp:
            rc, out, err = lesanet.cmd_ontology("expand", data("chest_abdomen.onto"), data("expand_example.txt"))
            self.assertEqual(rc, 0, err)
            self.assertTrue(out.startswith("chest, lung, right lung, right mid lung"))
            rc, _, err = lesanet.cmd_mine(data("sentences.tsv"), data("chest_abdomen.onto"),
                                          os.path.join(tmp, "m.tsv"))
            self.assertEqual(rc, 0)
            self.assertIn("L004", err)
            with self.assertRaises(lesanet.ConfigError):
                lesanet.RunConfig(["loss.gamma=-1"])


if __name__ == "__main__":
    unittest.main()
