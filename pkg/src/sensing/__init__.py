# CSI Recon - CASSI sensing module
