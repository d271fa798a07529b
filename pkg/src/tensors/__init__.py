# CSI Recon - Tensor algebra module
