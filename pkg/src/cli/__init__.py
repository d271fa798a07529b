# CSI Recon - Command-line module
