# CSI Recon - Priors module
