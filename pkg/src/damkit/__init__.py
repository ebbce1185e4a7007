"""damkit: desk-scale localized captioning toolkit.

Subpackages and modules:
  geometry   -- boxes, masks, focal crop construction
  imageio    -- PPM images and RLE mask files
  numcore    -- tensors with reverse-mode autodiff, optimizers, checkpoints
  backbone   -- mask-aware dual vision encoders with gated cross-attention
  captioner  -- toy autoregressive decoder, training loop, greedy decoding
  synthetic  -- colored-squares localization task fixtures
  bench      -- reference-free benchmark scoring engine
  pipeline   -- two-stage data-pipeline simulator
  figures    -- matplotlib renderings written next to reports
  cli        -- the `damkit` command
"""

__version__ = "0.1.0"
