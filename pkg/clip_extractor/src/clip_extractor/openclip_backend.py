"""Optional backend binding a real contrastive checkpoint via open_clip."""

from __future__ import annotations

import numpy as np


class OpenClipEmbedder:
    def __init__(self, checkpoint: str):
        import open_clip
        import torch

        name, _, pretrained = checkpoint.partition("@")
        self._torch = torch
        self.model, _, self.preprocess = open_clip.create_model_and_transforms(
            name, pretrained=pretrained or None)
        self.tokenizer = open_clip.get_tokenizer(name)
        self.model.eval()
        self.model_id = f"open-clip:{checkpoint}"

    def embed_image(self, image) -> np.ndarray:
        with self._torch.no_grad():
            x = self.preprocess(image.convert("RGB")).unsqueeze(0)
            feats = self.model.encode_image(x)[0]
            feats = feats / feats.norm()
        return feats.cpu().numpy()

    def embed_text(self, text: str) -> np.ndarray:
        with self._torch.no_grad():
            tokens = self.tokenizer([text])
            feats = self.model.encode_text(tokens)[0]
            feats = feats / feats.norm()
        return feats.cpu().numpy()
