# CSI Recon - Evaluation module
