# CSI Recon - Storage module
