Grasp('left')
import subprocess
