# CSI Recon - Solvers module
