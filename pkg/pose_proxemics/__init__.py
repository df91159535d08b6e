# Pose Proxemics Django Project
