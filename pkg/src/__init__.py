# CSI Recon - Main package
